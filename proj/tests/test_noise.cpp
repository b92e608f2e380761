#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "hybridnn/error.hpp"
#include "hybridnn/noise.hpp"
#include "hybridnn/training.hpp"

using namespace hybridnn;
using namespace hybridnn::noise;
namespace fs = std::filesystem;

namespace {

constexpr cvqnn::NetworkShape kExemplar{8, 2, 1, 4, 7};

const Dataset& study() {
  static const Dataset d = generate(GenSpec{});
  return d;
}

double exemplar_amax() {
  static const double a = cvqnn::calibrate_amax(7, 0.99).a_max;
  return a;
}

const Network& trained(bool hybrid) {
  static const auto make = [](bool h) {
    TrainConfig cfg;
    cfg.epochs = h ? 60 : 120;
    cfg.seed = 7;
    cfg.a_max = exemplar_amax();
    Rng rng(cfg.seed, "init");
    Network n = h ? Network(HybridNetwork::random(kExemplar, cfg.a_max, rng))
                  : Network(random_classical_twin(kExemplar, rng));
    return train(std::move(n), study(), cfg).best_network;
  };
  static const Network hybrid_net = make(true);
  static const Network classical_net = make(false);
  return hybrid ? hybrid_net : classical_net;
}

}  // namespace

TEST_CASE("ENOB formula") {
  const ParameterRange cl(-1.0, 1.0);
  CHECK(enob(cl, 2.0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(enob(cl, 2.0 / 255.0) == doctest::Approx(8.0).epsilon(1e-14));
  CHECK(sigma_for_enob(cl, 5.5) == doctest::Approx(0.0451928031225589).epsilon(1e-13));
  CHECK(sigma_for_enob(cl, 1.0) == doctest::Approx(2.0));
  CHECK(enob(cl, 0.0) == kInfinitePrecision);
  CHECK(sigma_for_enob(cl, kInfinitePrecision) == 0.0);
  CHECK(sigma_for_enob(cl, 60.0) < 1e-17);
  CHECK_THROWS_AS(ParameterRange(1.0, 1.0), Error);
  CHECK_THROWS_AS(enob(cl, -1.0), Error);
  CHECK_THROWS_AS(sigma_for_enob(cl, 0.0), Error);

  for (double bits = 0.5; bits <= 16.0; bits += 0.125) {
    for (const ParameterRange r : {ParameterRange(-1, 1), ParameterRange(0, 2 * std::numbers::pi), ParameterRange(0, 0.55)}) {
      CHECK(std::abs(enob(r, sigma_for_enob(r, bits)) - bits) <= 1e-12);
    }
  }
}

TEST_CASE("parameter ranges") {
  const auto c = range_of(Domain::classical, 0.5);
  const auto p = range_of(Domain::phase, 0.5);
  const auto a = range_of(Domain::amplitude, 0.5);
  CHECK(c.w_min == -1.0);
  CHECK(c.w_max == 1.0);
  CHECK(p.w_min == 0.0);
  CHECK(p.w_max == doctest::Approx(2 * std::numbers::pi));
  CHECK(a.w_max == 0.5);
  CHECK_THROWS_AS(range_of(Domain::amplitude, 0.0), Error);
}

TEST_CASE("group names") {
  for (auto g : {NoiseGroup::classical, NoiseGroup::displacement, NoiseGroup::squeezing, NoiseGroup::kerr,
                 NoiseGroup::interferometer, NoiseGroup::phase, NoiseGroup::amplitude}) {
    CHECK(noise_group_from_string(to_string(g)) == g);
  }
  try {
    (void)noise_group_from_string("thermal");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::configuration);
  }
  CHECK_FALSE(is_quantum_group(NoiseGroup::classical));
  CHECK(is_quantum_group(NoiseGroup::phase));
}

TEST_CASE("noise spec validation") {
  Rng rng(1, "test");
  const Network h = HybridNetwork::random(kExemplar, 0.55, rng);
  const Network c = random_classical_twin(kExemplar, rng);
  CHECK_NOTHROW(NoiseSpec::whole_network(h, 4).validate(h));
  CHECK_NOTHROW(NoiseSpec::whole_network(c, 4).validate(c));
  CHECK(NoiseSpec::whole_network(c, 4).bits.size() == 1);
  try {
    NoiseSpec::single(NoiseGroup::kerr, 4).validate(c);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::configuration);
  }
  NoiseSpec overlap = NoiseSpec::single(NoiseGroup::kerr, 4);
  overlap.bits[NoiseGroup::phase] = 4;
  CHECK_THROWS_AS(overlap.validate(h), Error);
  CHECK_THROWS_AS(NoiseSpec::single(NoiseGroup::kerr, -1).validate(h), Error);
  NoiseSpec none = NoiseSpec::single(NoiseGroup::kerr, 4);
  none.realizations = 0;
  CHECK_THROWS_AS(none.validate(h), Error);
  NoiseSpec domains = NoiseSpec::single(NoiseGroup::phase, 4);
  domains.bits[NoiseGroup::amplitude] = 3;
  domains.bits[NoiseGroup::classical] = 5;
  CHECK_NOTHROW(domains.validate(h));
}

TEST_CASE("per-parameter sigmas follow each parameter's own range") {
  Rng rng(2, "test");
  const Network h = HybridNetwork::random(kExemplar, 0.55, rng);
  const auto layout = parameter_layout(h);
  const auto sig = parameter_sigmas(h, NoiseSpec::whole_network(h, 3.0));
  REQUIRE(sig.size() == layout.size());
  for (std::size_t i = 0; i < sig.size(); ++i) {
    const double width = range_of(layout[i].domain, 0.55).width();
    CHECK(sig[i] == doctest::Approx(width / 7.0).epsilon(1e-14));
  }
  const auto only_sq = parameter_sigmas(h, NoiseSpec::single(NoiseGroup::squeezing, 3.0));
  for (std::size_t i = 0; i < sig.size(); ++i) {
    CHECK((only_sq[i] > 0.0) == (layout[i].group == GateGroup::squeezing));
  }
  const auto amp = parameter_sigmas(h, NoiseSpec::single(NoiseGroup::amplitude, 3.0));
  for (std::size_t i = 0; i < sig.size(); ++i) CHECK((amp[i] > 0.0) == (layout[i].domain == Domain::amplitude));
}

TEST_CASE("perturb purity, repeatability and isolation") {
  Rng rng(3, "test");
  const Network h = HybridNetwork::random(kExemplar, 0.55, rng);
  const Eigen::VectorXd before = flat_params(h);
  const auto layout = parameter_layout(h);

  const Network a = perturb(h, NoiseSpec::whole_network(h, 4), 11);
  const Network b = perturb(h, NoiseSpec::whole_network(h, 4), 11);
  const Network c = perturb(h, NoiseSpec::whole_network(h, 4), 12);
  CHECK(flat_params(h) == before);
  CHECK(flat_params(a) == flat_params(b));
  CHECK(flat_params(a) != flat_params(c));
  CHECK(flat_params(a) != before);
  CHECK(flat_params(perturb(h, NoiseSpec::whole_network(h, kInfinitePrecision), 11)) == before);

  for (auto [group, gate] : {std::pair{NoiseGroup::classical, GateGroup::classical},
                             std::pair{NoiseGroup::squeezing, GateGroup::squeezing},
                             std::pair{NoiseGroup::displacement, GateGroup::displacement},
                             std::pair{NoiseGroup::kerr, GateGroup::kerr},
                             std::pair{NoiseGroup::interferometer, GateGroup::interferometer}}) {
    const Eigen::VectorXd noisy = flat_params(perturb(h, NoiseSpec::single(group, 3), 5));
    int moved = 0;
    for (Eigen::Index i = 0; i < noisy.size(); ++i) {
      if (layout[std::size_t(i)].group != gate) {
        CHECK(noisy[i] == before[i]);
      } else {
        moved += noisy[i] != before[i];
      }
    }
    CHECK(moved > 0);
  }

  const Network far = perturb(h, NoiseSpec::whole_network(h, 0.5), 1);
  const Eigen::VectorXd f = flat_params(far);
  for (Eigen::Index i = 0; i < f.size(); ++i) {
    const auto [lo, hi] = domain_range(layout[std::size_t(i)].domain, 0.55);
    CHECK(f[i] >= lo);
    CHECK(f[i] <= hi);
  }
}

TEST_CASE("empirical noise std matches sigma within 3% over 10^4 draws") {
  const Network zero = build_classical_twin(kExemplar);
  const NoiseSpec spec = NoiseSpec::whole_network(zero, 8.0);
  const double sigma = sigma_for_enob(ParameterRange(-1, 1), 8.0);
  double sum = 0.0, sum_sq = 0.0;
  const int n = 10000;
  for (int s = 0; s < n; ++s) {
    const double x = flat_params(perturb(zero, spec, std::uint64_t(s)))[17];
    sum += x;
    sum_sq += x * x;
  }
  const double mean = sum / n;
  const double sd = std::sqrt(sum_sq / n - mean * mean);
  CHECK(std::abs(sd / sigma - 1.0) < 0.03);
  CHECK(std::abs(mean) < 4 * sigma / std::sqrt(double(n)));
}

TEST_CASE("spearman") {
  CHECK(spearman({1, 2, 3, 4}, {10, 20, 30, 40}) == doctest::Approx(1.0));
  CHECK(spearman({1, 2, 3, 4}, {4, 3, 2, 1}) == doctest::Approx(-1.0));
  CHECK(spearman({1, 2, 3, 4}, {1, 3, 2, 4}) == doctest::Approx(0.8));
  // Ties use average ranks: ranks (1, 2.5, 2.5, 4) against (1, 2, 3, 4).
  CHECK(spearman({1, 2, 3, 4}, {0.1, 0.5, 0.5, 0.9}) == doctest::Approx(0.9486832980505138));
  CHECK_THROWS_AS(spearman({1, 2}, {1, 2, 3}), Error);
}

TEST_CASE("near-ideal ENOB interpolation") {
  NoiseCurve c;
  c.noiseless_accuracy = 0.8;
  for (auto [e, m] : {std::pair{1.0, 0.3}, {2.0, 0.5}, {3.0, 0.7}, {4.0, 0.78}}) {
    CurvePoint p;
    p.enob = e;
    p.mean = m;
    c.points.push_back(p);
  }
  // 0.9 * 0.8 = 0.72 lies a quarter of the way from 0.70 to 0.78.
  CHECK(*near_ideal_enob(c) == doctest::Approx(3.25));
  CHECK(*near_ideal_enob(c, 0.3) == doctest::Approx(1.0));
  CHECK_FALSE(near_ideal_enob(c, 0.99).has_value());
}

TEST_CASE("whole-network sweeps on trained networks") {
  const auto grid = default_enob_grid();
  CHECK(grid == std::vector<double>{0.5, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 12});
  for (bool hybrid : {false, true}) {
    const Network& n = trained(hybrid);
    SweepOptions opt;
    opt.seed = 5;
    const NoiseCurve curve = enob_sweep(n, study(), grid, opt);
    INFO((hybrid ? "hybrid" : "classical") << " noiseless " << curve.noiseless_accuracy);
    CHECK(curve.group == "network");
    CHECK(curve.noiseless_accuracy == accuracy(n, study().validation()));
    REQUIRE(curve.points.size() == grid.size());
    for (const auto& p : curve.points) CHECK(p.accuracies.size() == 10);
    CHECK(std::abs(curve.points.back().mean - curve.noiseless_accuracy) <= 0.02);
    CHECK(curve.points.front().mean <= 0.45);
    CHECK(curve.spearman >= 0.8);

    opt.jobs = 3;
    const NoiseCurve parallel = enob_sweep(n, study(), grid, opt);
    for (std::size_t i = 0; i < grid.size(); ++i) CHECK(parallel.points[i].accuracies == curve.points[i].accuracies);
  }
}

TEST_CASE("per-gate sweeps") {
  const Network& h = trained(true);
  const std::vector<double> grid{2.0, kInfinitePrecision};
  SweepOptions opt;
  opt.realizations = 3;
  const NoiseCurve kerr = per_gate_sweep(h, study(), NoiseGroup::kerr, grid, opt);
  CHECK(kerr.group == "kerr");
  CHECK(kerr.points.back().mean == kerr.noiseless_accuracy);
  CHECK(kerr.points.back().stddev == 0.0);
  try {
    (void)per_gate_sweep(trained(false), study(), NoiseGroup::squeezing, grid, opt);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::configuration);
  }
}

TEST_CASE("noise CSV and SVG output") {
  NoiseCurve c;
  c.group = "kerr";
  c.noiseless_accuracy = 0.8;
  CurvePoint p;
  p.enob = 2;
  p.accuracies = {0.5, 0.7};
  p.mean = 0.6;
  p.stddev = 0.1;
  c.points = {p};
  const fs::path dir = fs::temp_directory_path() / "hybridnn-test-noise";
  fs::create_directories(dir);
  write_raw_csv(dir / "raw.csv", {c});
  write_aggregate_csv(dir / "agg.csv", {c});
  auto lines = [](const fs::path& f) {
    std::ifstream in(f);
    std::vector<std::string> out;
    for (std::string l; std::getline(in, l);) out.push_back(l);
    return out;
  };
  const auto raw = lines(dir / "raw.csv");
  REQUIRE(raw.size() == 4);
  CHECK(raw[1] == "group,enob,realization,accuracy");
  CHECK(raw[2].rfind("kerr,2,0,0.5", 0) == 0);
  const auto agg = lines(dir / "agg.csv");
  REQUIRE(agg.size() == 4);
  CHECK(agg[1] == "group,enob,mean,std");
  CHECK(agg[2].rfind("kerr,inf,0.8", 0) == 0);
  CHECK(agg[3].rfind("kerr,2,0.6", 0) == 0);
  const std::string svg = curves_svg({c}, "test");
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("kerr") != std::string::npos);
  fs::remove_all(dir);
}
