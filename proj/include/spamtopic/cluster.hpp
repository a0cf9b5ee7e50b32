#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "spamtopic/errors.hpp"
#include "spamtopic/vectorize.hpp"

namespace spamtopic::cluster {

using vectorize::SparseVector;

/// Node numbering: leaves 0..n-1, merge i creates node n+i.
struct Merge {
  std::size_t left = 0;   // smaller node id
  std::size_t right = 0;
  double height = 0.0;
  std::size_t size = 0;
  bool operator==(const Merge&) const = default;
};

struct Dendrogram {
  std::size_t n_leaves = 0;
  std::vector<Merge> merges;  // n_leaves - 1 entries, heights non-decreasing
  bool operator==(const Dendrogram&) const = default;
};

/// Ward linkage with Lance-Williams updates. Height of merging A and B is
/// sqrt(2|A||B| / (|A|+|B|)) * |centroid(A) - centroid(B)|. Equal-cost pairs
/// resolve to the lexicographically smallest (min leaf of A, min leaf of B).
Dendrogram ward_agglomerate(std::span<const SparseVector> vectors);

/// Throws unless the structural invariants hold.
void check_dendrogram(const Dendrogram& d);

struct ClusterAssignment {
  std::optional<double> cut_height;
  std::optional<std::size_t> cut_k;
  std::vector<std::size_t> membership;  // per leaf; ids ordered by smallest leaf
  std::size_t cluster_count = 0;

  std::vector<std::size_t> sizes() const;
  std::vector<std::vector<std::size_t>> members() const;
};

/// Components after discarding merges with height > `height`.
ClusterAssignment cut_dendrogram(const Dendrogram& d, double height);
/// Applies the first n - k merges.
ClusterAssignment cut_to_k(const Dendrogram& d, std::size_t k);

std::string dendrogram_to_json(const Dendrogram& d);
Dendrogram dendrogram_from_json(const std::string& text);

/// Errors with an HTTP-like category: conflict (already labeled, exported),
/// not_found (unknown cluster), unprocessable (malformed request, unlabeled
/// clusters at export).
class SessionError : public Error {
 public:
  enum class Code { conflict, not_found, unprocessable };
  SessionError(Code code, const std::string& what) : Error(ErrorKind::validation, what), code_(code) {}
  Code code() const noexcept { return code_; }

 private:
  Code code_;
};

struct SessionOp {
  enum class Type { cut, merge, label, undo };
  Type type = Type::cut;
  std::optional<double> height;
  std::optional<std::size_t> k;
  std::vector<std::size_t> clusters;
  std::string label;
};

struct LabeledGroup {
  std::vector<std::size_t> clusters;
  std::string label;
};

struct ExportResult {
  std::vector<std::string> labels;  // per leaf
  std::map<std::string, std::size_t> class_counts;
};

/// Human-steered labeling over one dendrogram. State is the replay of an
/// append-only operation log; undo appends a marker that cancels the most
/// recent effective operation.
class LabelingSession {
 public:
  LabelingSession(std::string id, Dendrogram dendrogram);

  const std::string& id() const { return id_; }
  const Dendrogram& dendrogram() const { return dendrogram_; }
  bool exported() const { return exported_.has_value(); }

  const ClusterAssignment& cut(std::optional<double> height, std::optional<std::size_t> k);
  void merge(const std::vector<std::size_t>& clusters, const std::string& label);
  void label(std::size_t cluster, const std::string& label);
  void undo();
  const ExportResult& export_labels();

  const std::optional<ClusterAssignment>& assignment() const { return assignment_; }
  const std::vector<LabeledGroup>& groups() const { return groups_; }
  /// Label of `cluster` in the current cut, if any.
  std::optional<std::string> label_of(std::size_t cluster) const;
  const std::vector<SessionOp>& log() const { return log_; }

  /// Rebuilds a session from its dendrogram and a stored operation log.
  static LabelingSession replay(std::string id, Dendrogram dendrogram, const std::vector<SessionOp>& log);

 private:
  void require_open() const;
  void apply(const SessionOp& op);
  void rebuild();

  std::string id_;
  Dendrogram dendrogram_;
  std::vector<SessionOp> log_;
  std::optional<ClusterAssignment> assignment_;
  std::vector<LabeledGroup> groups_;
  std::optional<ExportResult> exported_;
};

std::string session_op_to_json(const SessionOp& op);
SessionOp session_op_from_json(const std::string& line);

}  // namespace spamtopic::cluster
