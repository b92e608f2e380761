#include "hybridnn/datagen.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "hybridnn/error.hpp"
#include "hybridnn/rng.hpp"

namespace hybridnn {

namespace {

SampleSet rows(const SampleSet& all, std::size_t begin, std::size_t end) {
  SampleSet out;
  out.features = all.features.middleRows(Eigen::Index(begin), Eigen::Index(end - begin));
  out.labels.assign(all.labels.begin() + std::ptrdiff_t(begin), all.labels.begin() + std::ptrdiff_t(end));
  return out;
}

Eigen::MatrixXd random_orthogonal(int n, Rng& rng) {
  Eigen::MatrixXd g(n, n);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) g(r, c) = rng.normal();
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ();
  // Fix column signs so Q is a deterministic function of g.
  const Eigen::MatrixXd rm = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int c = 0; c < n; ++c) {
    if (rm(c, c) < 0) q.col(c) *= -1.0;
  }
  return q;
}

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

const char* to_string(ClusterGeometry g) {
  return g == ClusterGeometry::per_cluster ? "per_cluster" : "min_distance";
}

ClusterGeometry cluster_geometry_from_string(const std::string& name) {
  if (name == "per_cluster") return ClusterGeometry::per_cluster;
  if (name == "min_distance") return ClusterGeometry::min_distance;
  throw Error(ErrorKind::configuration, "field 'geometry': unknown value '" + name + "'");
}

void GenSpec::validate() const {
  auto fail = [](const char* field, const std::string& why) {
    throw Error(ErrorKind::configuration, std::string("field '") + field + "': " + why);
  };
  if (samples < 1) fail("samples", "must be positive");
  if (classes < 2) fail("classes", "need at least two classes");
  if (features < 1 || features > 30) fail("features", "must be in 1..30");
  if (clusters_per_class < 1) fail("clusters_per_class", "must be positive");
  if (long(classes) * clusters_per_class > (1L << features)) {
    fail("clusters_per_class", "more clusters than hypercube vertices");
  }
  if (!(class_sep > 0.0)) fail("class_sep", "must be positive");
  if (!(flip_fraction >= 0.0 && flip_fraction <= 1.0)) fail("flip_fraction", "must be in [0, 1]");
  if (train_count < 1 || train_count >= samples) fail("train_count", "must be in 1..samples-1");
}

SampleSet Dataset::train() const { return rows(all, 0, std::size_t(spec.train_count)); }
SampleSet Dataset::validation() const {
  return rows(all, std::size_t(spec.train_count), all.size());
}

Dataset generate(const GenSpec& spec) {
  spec.validate();
  const int f = spec.features;
  const int n_clusters = spec.classes * spec.clusters_per_class;

  // Distinct hypercube vertices, one per cluster.
  Rng centroid_rng(spec.seed, "centroids");
  std::vector<std::uint64_t> vertices;
  std::set<std::uint64_t> used;
  while (int(vertices.size()) < n_clusters) {
    const auto v = centroid_rng.below(std::uint64_t(1) << f);
    if (used.insert(v).second) vertices.push_back(v);
  }
  int min_hamming = f;
  for (std::size_t i = 0; i < vertices.size(); ++i) {
    for (std::size_t j = i + 1; j < vertices.size(); ++j) {
      min_hamming = std::min(min_hamming, std::popcount(vertices[i] ^ vertices[j]));
    }
  }
  // Distance between vertices at Hamming distance h is 2 * half * sqrt(h).
  const double half = spec.geometry == ClusterGeometry::per_cluster
                          ? spec.class_sep
                          : spec.class_sep / (2.0 * std::sqrt(double(std::max(min_hamming, 1))));
  Eigen::MatrixXd centroids(n_clusters, f);
  for (int c = 0; c < n_clusters; ++c) {
    for (int k = 0; k < f; ++k) centroids(c, k) = ((vertices[std::size_t(c)] >> k) & 1u) ? half : -half;
  }

  Rng mixing_rng(spec.seed, "mixing");
  std::vector<Eigen::MatrixXd> cluster_mix;
  if (spec.geometry == ClusterGeometry::per_cluster) {
    for (int c = 0; c < n_clusters; ++c) {
      Eigen::MatrixXd a(f, f);
      for (int r = 0; r < f; ++r) {
        for (int k = 0; k < f; ++k) a(r, k) = mixing_rng.uniform(-1.0, 1.0);
      }
      cluster_mix.push_back(std::move(a));
    }
  }

  // Balanced classes, round-robin clusters within a class.
  Rng sample_rng(spec.seed, "samples");
  Eigen::VectorXd z(f);
  Eigen::MatrixXd x(spec.samples, f);
  std::vector<int> labels(std::size_t(spec.samples));
  std::vector<int> per_class(std::size_t(spec.classes), 0);
  for (int i = 0; i < spec.samples; ++i) {
    const int label = i % spec.classes;
    const int cluster = label * spec.clusters_per_class + per_class[std::size_t(label)] % spec.clusters_per_class;
    ++per_class[std::size_t(label)];
    labels[std::size_t(i)] = label;
    for (int k = 0; k < f; ++k) z[k] = sample_rng.normal();
    if (spec.geometry == ClusterGeometry::per_cluster) z = cluster_mix[std::size_t(cluster)].transpose() * z;
    x.row(i) = centroids.row(cluster) + z.transpose();
  }

  if (spec.geometry == ClusterGeometry::min_distance) {
    // Shared mixing A = U diag(s) V^T with s in [1, 10].
    const Eigen::MatrixXd u = random_orthogonal(f, mixing_rng);
    const Eigen::MatrixXd v = random_orthogonal(f, mixing_rng);
    Eigen::VectorXd s(f);
    for (int k = 0; k < f; ++k) s[k] = mixing_rng.uniform(1.0, 10.0);
    s[0] = 1.0;
    const Eigen::MatrixXd mixing = u * s.asDiagonal() * v.transpose();
    x = x * mixing.transpose();
  }

  std::vector<int> clean = labels;
  Rng flip_rng(spec.seed, "flips");
  const int n_flip = int(std::lround(spec.flip_fraction * spec.samples));
  std::vector<int> order(std::size_t(spec.samples));
  std::iota(order.begin(), order.end(), 0);
  flip_rng.shuffle(order.begin(), order.end());
  for (int i = 0; i < n_flip; ++i) {
    labels[std::size_t(order[std::size_t(i)])] = int(flip_rng.below(std::uint64_t(spec.classes)));
  }

  for (int k = 0; k < f; ++k) {
    const double lo = x.col(k).minCoeff();
    const double hi = x.col(k).maxCoeff();
    const double span = hi - lo;
    for (int i = 0; i < spec.samples; ++i) {
      x(i, k) = span > 0.0 ? (x(i, k) - lo) / span : 0.0;
    }
  }

  Rng shuffle_rng(spec.seed, "shuffle");
  std::iota(order.begin(), order.end(), 0);
  shuffle_rng.shuffle(order.begin(), order.end());
  Dataset d;
  d.spec = spec;
  d.all.features.resize(spec.samples, f);
  d.all.labels.resize(std::size_t(spec.samples));
  d.clean_labels.resize(std::size_t(spec.samples));
  for (int i = 0; i < spec.samples; ++i) {
    const auto src = std::size_t(order[std::size_t(i)]);
    d.all.features.row(i) = x.row(Eigen::Index(src));
    d.all.labels[std::size_t(i)] = labels[src];
    d.clean_labels[std::size_t(i)] = clean[src];
  }
  return d;
}

BaselineResult fit_linear_baseline(const Dataset& dataset) {
  return fit_linear_baseline(dataset.train(), dataset.validation(), dataset.spec.classes);
}

BaselineResult fit_linear_baseline(const SampleSet& train, const SampleSet& validation,
                                   int classes) {
  // Primal one-vs-rest squared-hinge SVM, C = 1, bias as an extra constant
  // feature (regularized like the weights):
  //   min_w 0.5 |w|^2 + C sum_i max(0, 1 - y_i w.x_i)^2
  // solved by Newton steps on the active set with backtracking.
  constexpr double kC = 1.0;
  constexpr int kMaxIter = 200;
  constexpr double kTol = 1e-10;
  const Eigen::Index n = train.features.rows();
  const Eigen::Index f = train.features.cols() + 1;
  Eigen::MatrixXd xb(n, f);
  xb << train.features, Eigen::VectorXd::Ones(n);

  auto objective = [&](const Eigen::VectorXd& w, const Eigen::VectorXd& y) {
    const Eigen::ArrayXd slack = (1.0 - y.array() * (xb * w).array()).max(0.0);
    return 0.5 * w.squaredNorm() + kC * slack.square().sum();
  };

  Eigen::MatrixXd weights(classes, f);
  BaselineResult result;
  result.converged = true;
  for (int c = 0; c < classes; ++c) {
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) y[i] = train.labels[std::size_t(i)] == c ? 1.0 : -1.0;
    Eigen::VectorXd w = Eigen::VectorXd::Zero(f);
    bool converged = false;
    int it = 0;
    for (; it < kMaxIter; ++it) {
      const Eigen::ArrayXd margin = y.array() * (xb * w).array();
      const Eigen::ArrayXd active = (margin < 1.0).cast<double>();
      const Eigen::VectorXd r = (active * (1.0 - margin) * y.array()).matrix();
      const Eigen::VectorXd grad = w - 2.0 * kC * xb.transpose() * r;
      if (grad.norm() < kTol * std::max(1.0, w.norm())) {
        converged = true;
        break;
      }
      Eigen::MatrixXd hess = Eigen::MatrixXd::Identity(f, f);
      hess += 2.0 * kC * xb.transpose() * active.matrix().asDiagonal() * xb;
      const Eigen::VectorXd step = hess.ldlt().solve(grad);
      const double f0 = objective(w, y);
      double t = 1.0;
      while (t > 1e-12 && objective(w - t * step, y) > f0 - 1e-4 * t * grad.dot(step)) t *= 0.5;
      w -= t * step;
    }
    result.iterations = std::max(result.iterations, it);
    result.converged = result.converged && converged;
    weights.row(c) = w.transpose();
  }

  auto score = [&](const SampleSet& set) {
    if (set.size() == 0) return 0.0;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < set.size(); ++i) {
      Eigen::VectorXd xi(f);
      xi << set.sample(i), 1.0;
      const Eigen::VectorXd s = weights * xi;
      Eigen::Index best = 0;
      for (Eigen::Index k = 1; k < s.size(); ++k) {
        if (s[k] > s[best]) best = k;
      }
      if (int(best) == set.labels[i]) ++correct;
    }
    return double(correct) / double(set.size());
  };
  result.train_accuracy = score(train);
  result.validation_accuracy = score(validation);
  return result;
}

std::vector<Point2> convex_hull(std::vector<Point2> pts) {
  std::sort(pts.begin(), pts.end(), [](Point2 a, Point2 b) { return a.x < b.x || (a.x == b.x && a.y < b.y); });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) return pts;
  auto cross = [](Point2 o, Point2 a, Point2 b) {
    return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
  };
  std::vector<Point2> hull(2 * pts.size());
  std::size_t k = 0;
  for (const auto& p : pts) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
    while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

namespace {

double orient(Point2 o, Point2 a, Point2 b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

bool on_segment(Point2 a, Point2 b, Point2 p, double tol) {
  if (std::abs(orient(a, b, p)) > tol) return false;
  return p.x >= std::min(a.x, b.x) - tol && p.x <= std::max(a.x, b.x) + tol &&
         p.y >= std::min(a.y, b.y) - tol && p.y <= std::max(a.y, b.y) + tol;
}

bool segments_intersect(Point2 a, Point2 b, Point2 c, Point2 d) {
  const double d1 = orient(c, d, a), d2 = orient(c, d, b);
  const double d3 = orient(a, b, c), d4 = orient(a, b, d);
  if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0))) {
    return true;
  }
  return on_segment(c, d, a, 1e-12) || on_segment(c, d, b, 1e-12) || on_segment(a, b, c, 1e-12) ||
         on_segment(a, b, d, 1e-12);
}

}  // namespace

bool hull_contains(std::span<const Point2> hull, Point2 p, double tol) {
  if (hull.empty()) return false;
  if (hull.size() == 1) return std::abs(hull[0].x - p.x) <= tol && std::abs(hull[0].y - p.y) <= tol;
  if (hull.size() == 2) return on_segment(hull[0], hull[1], p, tol);
  for (std::size_t i = 0; i < hull.size(); ++i) {
    if (orient(hull[i], hull[(i + 1) % hull.size()], p) < -tol) return false;
  }
  return true;
}

bool hulls_intersect(std::span<const Point2> a, std::span<const Point2> b) {
  for (const auto& p : a) {
    if (hull_contains(b, p)) return true;
  }
  for (const auto& p : b) {
    if (hull_contains(a, p)) return true;
  }
  if (a.size() < 2 || b.size() < 2) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) {
      if (segments_intersect(a[i], a[(i + 1) % a.size()], b[j], b[(j + 1) % b.size()])) return true;
    }
  }
  return false;
}

std::vector<ClassRegion> class_regions(const Dataset& dataset, int feature_i, int feature_j) {
  const auto f = dataset.all.features.cols();
  if (feature_i < 0 || feature_j < 0 || feature_i >= f || feature_j >= f) {
    throw Error(ErrorKind::range, "feature index out of range");
  }
  const SampleSet val = dataset.validation();
  std::vector<ClassRegion> out;
  for (int c = 0; c < dataset.spec.classes; ++c) {
    std::vector<Point2> pts;
    for (std::size_t i = 0; i < val.size(); ++i) {
      if (val.labels[i] == c) {
        pts.push_back({val.features(Eigen::Index(i), feature_i), val.features(Eigen::Index(i), feature_j)});
      }
    }
    out.push_back({c, convex_hull(std::move(pts))});
  }
  return out;
}

void write_dataset_csv(const Dataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
  const auto f = dataset.all.features.cols();
  out << "# hybridnn.dataset/1\n";
  for (Eigen::Index k = 0; k < f; ++k) out << 'f' << k << ',';
  out << "label\n";
  for (std::size_t i = 0; i < dataset.all.size(); ++i) {
    for (Eigen::Index k = 0; k < f; ++k) out << fmt_double(dataset.all.features(Eigen::Index(i), k)) << ',';
    out << dataset.all.labels[i] << '\n';
  }
  if (!out) throw Error(ErrorKind::io, "failed writing " + path.string());
}

SampleSet read_dataset_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::not_found, "cannot read " + path.string());
  std::string line;
  std::size_t lineno = 0;
  do {
    if (!std::getline(in, line)) throw Error(ErrorKind::io, path.string() + ": no header row");
    ++lineno;
  } while (line.starts_with('#'));
  const auto columns = std::count(line.begin(), line.end(), ',') + 1;
  if (columns < 2 || line.substr(line.rfind(',') + 1) != "label") {
    throw Error(ErrorKind::io, path.string() + ": header must be f0,...,label");
  }
  const auto f = Eigen::Index(columns - 1);
  std::vector<std::vector<double>> feats;
  std::vector<int> labels;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> row;
    const auto where = [&] { return path.string() + ":" + std::to_string(lineno); };
    while (std::getline(ss, cell, ',')) {
      double v = 0.0;
      const auto [end, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (ec != std::errc{} || end != cell.data() + cell.size()) {
        throw Error(ErrorKind::io, where() + ": not a number: '" + cell + "'");
      }
      row.push_back(v);
    }
    if (Eigen::Index(row.size()) != f + 1) throw Error(ErrorKind::io, where() + ": wrong column count");
    if (row.back() < 0 || row.back() != std::floor(row.back())) {
      throw Error(ErrorKind::io, where() + ": label must be a non-negative integer");
    }
    labels.push_back(int(row.back()));
    row.pop_back();
    feats.push_back(std::move(row));
  }
  SampleSet set;
  set.features.resize(Eigen::Index(feats.size()), f);
  for (std::size_t i = 0; i < feats.size(); ++i) {
    for (Eigen::Index k = 0; k < f; ++k) set.features(Eigen::Index(i), k) = feats[i][std::size_t(k)];
  }
  set.labels = std::move(labels);
  return set;
}

std::string gen_spec_to_json(const GenSpec& spec) {
  nlohmann::ordered_json j;
  j["schema"] = "hybridnn.genspec/1";
  j["samples"] = spec.samples;
  j["classes"] = spec.classes;
  j["features"] = spec.features;
  j["clusters_per_class"] = spec.clusters_per_class;
  j["class_sep"] = spec.class_sep;
  j["geometry"] = to_string(spec.geometry);
  j["flip_fraction"] = spec.flip_fraction;
  j["train_count"] = spec.train_count;
  j["seed"] = spec.seed;
  return j.dump(2) + "\n";
}

GenSpec gen_spec_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::configuration, std::string("dataset spec is not valid JSON: ") + e.what());
  }
  GenSpec spec;
  const std::set<std::string> known{"schema", "samples", "classes", "features", "clusters_per_class",
                                    "class_sep", "geometry", "flip_fraction", "train_count", "seed"};
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw Error(ErrorKind::configuration, "field '" + key + "': unknown field");
  }
  auto read = [&](const char* key, auto& field) {
    if (!j.contains(key)) return;
    try {
      j.at(key).get_to(field);
    } catch (const nlohmann::json::exception&) {
      throw Error(ErrorKind::configuration, std::string("field '") + key + "': wrong type");
    }
  };
  read("samples", spec.samples);
  read("classes", spec.classes);
  read("features", spec.features);
  read("clusters_per_class", spec.clusters_per_class);
  read("class_sep", spec.class_sep);
  if (j.contains("geometry")) {
    if (!j.at("geometry").is_string()) throw Error(ErrorKind::configuration, "field 'geometry': wrong type");
    spec.geometry = cluster_geometry_from_string(j.at("geometry").get<std::string>());
  }
  read("flip_fraction", spec.flip_fraction);
  read("train_count", spec.train_count);
  read("seed", spec.seed);
  spec.validate();
  return spec;
}

std::filesystem::path spec_sidecar_path(const std::filesystem::path& csv_path) {
  auto p = csv_path;
  p.replace_extension(".spec.json");
  return p;
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& csv_path) {
  if (csv_path.has_parent_path()) std::filesystem::create_directories(csv_path.parent_path());
  write_dataset_csv(dataset, csv_path);
  std::ofstream out(spec_sidecar_path(csv_path), std::ios::binary);
  if (!out) throw Error(ErrorKind::io, "cannot write spec sidecar for " + csv_path.string());
  out << gen_spec_to_json(dataset.spec);
}

Dataset load_dataset(const std::filesystem::path& csv_path) {
  Dataset d;
  const auto sidecar = spec_sidecar_path(csv_path);
  std::ifstream in(sidecar);
  if (!in) throw Error(ErrorKind::not_found, "missing dataset spec " + sidecar.string());
  std::stringstream buf;
  buf << in.rdbuf();
  d.spec = gen_spec_from_json(buf.str());
  d.all = read_dataset_csv(csv_path);
  if (int(d.all.size()) != d.spec.samples || d.all.features.cols() != d.spec.features) {
    throw Error(ErrorKind::io, csv_path.string() + " does not match its spec sidecar");
  }
  return d;
}

}  // namespace hybridnn
