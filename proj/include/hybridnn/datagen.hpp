#pragma once

// Synthetic 4-class / 8-feature dataset in the style of a hypercube-cluster
// classification generator, plus the linear baseline that sets the
// well-trained threshold.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace hybridnn {

/// A set of labelled samples; rows of `features` are samples.
struct SampleSet {
  Eigen::MatrixXd features;
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
  Eigen::VectorXd sample(std::size_t i) const { return features.row(Eigen::Index(i)).transpose(); }
};

/// How cluster centroids and spreads are laid out.
///  - per_cluster: vertices of {-class_sep, +class_sep}^F, each cluster's unit
///    Gaussian multiplied by its own random matrix with entries on [-1, 1].
///  - min_distance: vertices scaled so the closest centroid pair is class_sep
///    apart, unit Gaussians, one shared mixing matrix (condition <= 10).
enum class ClusterGeometry { per_cluster, min_distance };

const char* to_string(ClusterGeometry g);
ClusterGeometry cluster_geometry_from_string(const std::string& name);

struct GenSpec {
  int samples = 1000;
  int classes = 4;
  int features = 8;
  int clusters_per_class = 3;
  double class_sep = 3.0;
  ClusterGeometry geometry = ClusterGeometry::per_cluster;
  double flip_fraction = 0.02;
  int train_count = 700;
  std::uint64_t seed = 3;

  /// Throws ErrorKind::configuration naming the offending field.
  void validate() const;
  friend bool operator==(const GenSpec&, const GenSpec&) = default;
};

struct Dataset {
  GenSpec spec;
  SampleSet all;    // after shuffle: rows [0, train_count) train, rest validation
  std::vector<int> clean_labels;  // labels before flipping, same order as `all`

  SampleSet train() const;
  SampleSet validation() const;
};

/// Centroids are distinct random hypercube vertices (see ClusterGeometry).
/// Samples are assigned to classes round-robin (balanced) and to a class's
/// clusters round-robin. Then exactly round(flip_fraction * n) samples get a
/// uniformly redrawn label, features are min-max normalized per column, and
/// rows are shuffled before the train/validation split.
///
/// Random streams: "centroids", "samples", "mixing", "flips", "shuffle".
Dataset generate(const GenSpec& spec);

struct BaselineResult {
  double validation_accuracy = 0.0;
  double train_accuracy = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// One-vs-rest linear SVM (squared hinge, C = 1, L2-regularized) fitted to
/// convergence by damped Newton steps on the training split; scores the
/// validation split. Deterministic.
BaselineResult fit_linear_baseline(const Dataset& dataset);
BaselineResult fit_linear_baseline(const SampleSet& train, const SampleSet& validation,
                                   int classes);

struct Point2 {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point2&, const Point2&) = default;
};

struct ClassRegion {
  int label = 0;
  std::vector<Point2> hull;  // counter-clockwise, no repeated first point
};

/// Convex hull of each class's validation samples in the (feature_i,
/// feature_j) plane.
std::vector<ClassRegion> class_regions(const Dataset& dataset, int feature_i, int feature_j);

/// Monotone-chain convex hull.
std::vector<Point2> convex_hull(std::vector<Point2> points);
bool hull_contains(std::span<const Point2> hull, Point2 p, double tol = 1e-12);
/// True if the two convex polygons overlap with positive area or touch.
bool hulls_intersect(std::span<const Point2> a, std::span<const Point2> b);

/// CSV: a "# hybridnn.dataset/1" line, the header f0,...,f{F-1},label, then
/// one row per sample in `all` order. Readers skip leading "#" lines.
void write_dataset_csv(const Dataset& dataset, const std::filesystem::path& path);
SampleSet read_dataset_csv(const std::filesystem::path& path);

std::string gen_spec_to_json(const GenSpec& spec);
GenSpec gen_spec_from_json(const std::string& text);

}  // namespace hybridnn

namespace hybridnn {

/// Writes `<stem>.csv` and the spec sidecar `<stem>.spec.json`.
void save_dataset(const Dataset& dataset, const std::filesystem::path& csv_path);
/// Reads a CSV plus its spec sidecar. The label-flip history is not stored,
/// so `clean_labels` is left empty.
Dataset load_dataset(const std::filesystem::path& csv_path);
std::filesystem::path spec_sidecar_path(const std::filesystem::path& csv_path);

}  // namespace hybridnn
