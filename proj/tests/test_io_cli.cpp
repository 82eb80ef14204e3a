#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "mhmm/cli/app.hpp"
#include "mhmm/io/csv_io.hpp"
#include "mhmm/io/json_io.hpp"
#include "mhmm/sampling/samplers.hpp"
#include "support/test_support.hpp"

using namespace mhmm;
using Catch::Approx;
using geometry::ManifoldPoint;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
  const fs::path dir = fs::temp_directory_path() / ("mhmm_test_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("model JSON round-trip is bit-exact") {
  Rng rng(123123);
  hmm::HmmParams p = cli::random_disk_hmm(rng, 3);
  // exercise non-trivial mantissas
  p.P(0, 0) = 0.1 + 1e-17;
  p.P.row(0) /= p.P.row(0).sum();
  const io::json j = io::model_to_json(p);
  const hmm::HmmParams q = io::model_from_json(j);
  REQUIRE(q.family->name() == p.family->name());
  REQUIRE((q.P - p.P).cwiseAbs().maxCoeff() == 0.0);
  REQUIRE((q.pi1 - p.pi1).cwiseAbs().maxCoeff() == 0.0);
  for (int a = 0; a < 3; ++a) {
    REQUIRE(q.emissions[a].sigma == p.emissions[a].sigma);
    REQUIRE(q.emissions[a].ybar.disk_coord() == p.emissions[a].ybar.disk_coord());
  }
  // serialized text also round-trips through a reparse
  const io::json j2 = io::json::parse(j.dump());
  REQUIRE(io::model_from_json(j2).P(0, 0) == p.P(0, 0));
}

TEST_CASE("sphere and spd points serialize per schema") {
  const auto sp = ManifoldPoint::sphere(Eigen::Vector3d(0.6, 0.0, 0.8));
  const io::json js = io::point_to_json(sp);
  REQUIRE(js.is_array());
  REQUIRE(js.size() == 3);
  const auto sp2 = io::point_from_json(js, geometry::Manifold::Sphere);
  REQUIRE((sp2.sphere_coords() - sp.sphere_coords()).norm() == 0.0);

  Eigen::Matrix2d m;
  m << 2.0, 0.25, 0.25, 1.0;
  const auto pp = ManifoldPoint::spd(m);
  const io::json jp = io::point_to_json(pp);
  REQUIRE(jp[0][1].get<double>() == 0.25);
  const auto pp2 = io::point_from_json(jp, geometry::Manifold::Spd);
  REQUIRE((pp2.spd_matrix() - m).norm() == 0.0);

  const io::json bad = {{"re", 0.1}};
  REQUIRE_THROWS_AS(io::point_from_json(bad, geometry::Manifold::Disk),
                    IoError);
}

TEST_CASE("field JSON round-trip") {
  mrf::FieldParams f;
  f.family = geometry::make_family("disk_gaussian", 2);
  f.V = Eigen::Vector2d(0.0, 0.75);
  f.J.resize(2, 2);
  f.J << 0.0, -0.25, -0.25, 1.5;
  f.emissions = {{ManifoldPoint::disk({0.1, 0.2}), 0.3},
                 {ManifoldPoint::disk({-0.3, 0.1}), 0.5}};
  const mrf::GridGraph grid(3, 2);
  const io::json j = io::field_to_json(f, grid);
  const io::FieldModel back = io::field_from_json(j);
  REQUIRE(back.grid.width() == 3);
  REQUIRE(back.grid.height() == 2);
  REQUIRE((back.params.V - f.V).cwiseAbs().maxCoeff() == 0.0);
  REQUIRE((back.params.J - f.J).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("observation CSV round-trip (chain and field layouts)") {
  const fs::path dir = temp_dir("csv");
  hmm::HmmParams p = cli::face_preset();
  const auto sim = sampling::simulate_hmm(p, 25, 3);
  const fs::path path = dir / "obs.csv";
  io::write_observations(path.string(), sim.obs, &sim.states);
  const io::ObservationFile file = io::read_observations(path.string());
  REQUIRE_FALSE(file.is_field);
  REQUIRE(file.obs.size() == 25);
  REQUIRE(file.states == sim.states);
  for (int t = 0; t < 25; ++t)
    REQUIRE(file.obs[t].disk_coord() == sim.obs[t].disk_coord());

  // field layout with x,y columns
  const mrf::GridGraph grid(5, 5);
  mrf::FieldParams f;
  f.family = p.family;
  f.V = Eigen::Vector2d(0.0, 0.4);
  f.J = Eigen::MatrixXd::Zero(2, 2);
  f.emissions = {{ManifoldPoint::disk(0.0), 0.3},
                 {ManifoldPoint::disk({0.5, 0.0}), 0.3}};
  std::vector<ManifoldPoint> field_obs;
  Rng frng(4);
  for (int z = 0; z < 25; ++z)
    field_obs.push_back(
        test_support::random_point(geometry::Manifold::Disk, 2, frng));
  const fs::path fpath = dir / "field_obs.csv";
  io::write_field_observations(fpath.string(), 5, field_obs);
  const io::ObservationFile ffile = io::read_observations(fpath.string());
  REQUIRE(ffile.is_field);
  REQUIRE(ffile.xy[7] == std::pair<int, int>(2, 1));
  REQUIRE(ffile.states.empty());
  for (int z = 0; z < 25; ++z)
    REQUIRE(ffile.obs[z].disk_coord() == field_obs[z].disk_coord());
}

TEST_CASE("CSV parse errors carry line numbers") {
  const fs::path dir = temp_dir("csv_err");
  {
    std::ofstream out(dir / "bad.csv");
    out << "t,state,re,im\n1,1,0.1,0.2\n2,1,zzz,0.3\n";
  }
  try {
    io::read_observations((dir / "bad.csv").string());
    FAIL("expected IoError");
  } catch (const IoError& e) {
    REQUIRE(e.line() == 3);
  }
  {
    std::ofstream out(dir / "badpoint.csv");
    out << "t,re,im\n1,1.5,0.0\n";
  }
  try {
    io::read_observations((dir / "badpoint.csv").string());
    FAIL("expected IoError");
  } catch (const IoError& e) {
    REQUIRE(e.line() == 2);  // |z| >= 1 is not a disk point
  }
}

TEST_CASE("cli: simulate is deterministic and fit consumes its output") {
  const fs::path dir = temp_dir("cli");
  const std::string out1 = (dir / "a").string();
  const std::string out2 = (dir / "b").string();
  REQUIRE(cli::run({"simulate", "--preset", "paper-face", "--T", "400",
                    "--seed", "11", "--out", out1}) == 0);
  REQUIRE(cli::run({"simulate", "--preset", "paper-face", "--T", "400",
                    "--seed", "11", "--out", out2}) == 0);
  REQUIRE(slurp(out1 + "/observations.csv") ==
          slurp(out2 + "/observations.csv"));
  REQUIRE(slurp(out1 + "/scatter.csv") == slurp(out2 + "/scatter.csv"));
  REQUIRE(fs::exists(out1 + "/model.json"));

  // per-state scatter means stay near the preset locations (T small, loose)
  REQUIRE(cli::run({"fit", "--obs", out1 + "/observations.csv", "--states",
                    "3", "--seed", "2", "--n-em", "100", "--out", out1}) == 0);
  const io::json fitted = io::load_json(out1 + "/fitted.json");
  REQUIRE(fitted.at("iterations").get<int>() >= 1);
  const auto trace = fitted.at("loglik_trace").get<std::vector<double>>();
  for (std::size_t k = 1; k < trace.size(); ++k)
    REQUIRE(trace[k] - trace[k - 1] >= -1e-9);
  // fitted model parses back
  REQUIRE_NOTHROW(io::model_from_json(fitted));
}

TEST_CASE("cli: sigma-scale multiplies the dispersion") {
  const fs::path dir = temp_dir("cli_scale");
  const std::string out1 = (dir / "s1").string();
  const std::string out5 = (dir / "s5").string();
  REQUIRE(cli::run({"simulate", "--preset", "paper-face", "--T", "4000",
                    "--seed", "21", "--out", out1}) == 0);
  REQUIRE(cli::run({"simulate", "--preset", "paper-face", "--T", "4000",
                    "--seed", "21", "--sigma-scale", "5", "--out", out5}) == 0);
  const hmm::HmmParams preset = cli::face_preset();
  auto mean_dist = [&](const std::string& path) {
    const io::ObservationFile file = io::read_observations(path);
    Eigen::Vector3d sum = Eigen::Vector3d::Zero();
    Eigen::Vector3d count = Eigen::Vector3d::Zero();
    for (std::size_t t = 0; t < file.obs.size(); ++t) {
      const int s = file.states[t];
      sum[s] += geometry::riemannian_distance(file.obs[t],
                                              preset.emissions[s].ybar);
      count[s] += 1.0;
    }
    return (sum.array() / count.array()).matrix().eval();
  };
  const Eigen::Vector3d d1 = mean_dist(out1 + "/observations.csv");
  const Eigen::Vector3d d5 = mean_dist(out5 + "/observations.csv");
  for (int s = 0; s < 3; ++s)
    REQUIRE(d5[s] / d1[s] == Approx(5.0).margin(0.5));
}

TEST_CASE("cli: exit codes") {
  const fs::path dir = temp_dir("cli_err");
  // usage: unknown subcommand / missing required option
  REQUIRE(cli::run({"frobnicate"}) == 1);
  REQUIRE(cli::run({"fit"}) == 1);
  // data: nonexistent file
  REQUIRE(cli::run({"fit", "--obs", (dir / "nope.csv").string(), "--states",
                    "2"}) == 2);
  // data: fit without model/states
  REQUIRE(cli::run({"simulate", "--preset", "paper-face", "--T", "50",
                    "--seed", "1", "--out", dir.string()}) == 0);
  REQUIRE(cli::run({"fit", "--obs", (dir / "observations.csv").string()}) ==
          2);
  // oracle suites: pass -> 0, unknown -> usage-level data error
  REQUIRE(cli::run({"oracle", "nope"}) == 2);
}
