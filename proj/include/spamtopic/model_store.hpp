#pragma once

#include <filesystem>
#include <optional>

#include "spamtopic/config.hpp"
#include "spamtopic/models.hpp"
#include "spamtopic/pipeline.hpp"

namespace spamtopic::store {

inline constexpr int kModelArtifactVersion = 1;

/// Directory artifact: manifest.json plus one binary file per class or
/// tree, each covered by a CRC-32 in the manifest.
void save_model(const models::TrainedModel& model, const std::filesystem::path& dir,
                const std::optional<Config>& config_snapshot = std::nullopt);
models::TrainedModel load_model(const std::filesystem::path& dir);

/// Same layout with the fitted encoder state added.
void save_pipeline(const eval::Pipeline& pipeline, const std::filesystem::path& dir,
                   const std::optional<Config>& config_snapshot = std::nullopt);
eval::Pipeline load_pipeline(const std::filesystem::path& dir);

}  // namespace spamtopic::store
