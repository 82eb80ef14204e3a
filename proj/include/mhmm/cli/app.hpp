#pragma once

// Command-line surface. Subcommands: simulate, fit, mc-study, oracle.
// Exit codes: 0 success, 1 usage, 2 data/parse, 3 numerical degeneracy.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "mhmm/cli/oracles.hpp"
#include "mhmm/hmm/em.hpp"
#include "mhmm/io/csv_io.hpp"
#include "mhmm/io/json_io.hpp"
#include "mhmm/sampling/samplers.hpp"

namespace mhmm::cli {

/// The three-state disk model of the reproduction experiment: a "face"
/// pattern in the Poincare disk (one wide mouth cluster at the origin, two
/// eye clusters near the boundary).
inline hmm::HmmParams face_preset() {
  hmm::HmmParams params;
  params.family = geometry::make_family("disk_gaussian", 2);
  params.P.resize(3, 3);
  params.P << 0.4, 0.3, 0.3,
      0.2, 0.6, 0.2,
      0.1, 0.1, 0.8;
  params.pi1 = Eigen::Vector3d(1.0, 0.0, 0.0);
  params.emissions = {
      {geometry::ManifoldPoint::disk({0.0, 0.0}), 0.1},
      {geometry::ManifoldPoint::disk({0.29, 0.82}), 0.4},
      {geometry::ManifoldPoint::disk({-0.29, 0.82}), 0.4},
  };
  params.validate();
  return params;
}

inline hmm::HmmParams load_model_or_preset(const std::string& model_path,
                                           const std::string& preset) {
  if (!model_path.empty())
    return io::model_from_json(io::load_json(model_path));
  if (preset == "paper-face") return face_preset();
  if (!preset.empty()) throw DomainError("unknown preset: " + preset);
  throw DomainError("either --model or --preset is required");
}

struct McRunSummary {
  std::uint64_t seed = 0;
  bool failed = false;
  std::string error;
  hmm::HmmParams params;  // label-aligned to the generating model
  double init_loglik = 0.0;
  double final_loglik = 0.0;
  int iterations = 0;
};

struct McStudyResult {
  std::vector<McRunSummary> runs;
  int n_failed = 0;
  Eigen::MatrixXd e_p, v_p;
  std::vector<std::vector<double>> e_ybar, v_ybar;  // flattened coordinates
  Eigen::VectorXd e_sigma, v_sigma;
  double max_v_p = 0.0, max_v_ybar = 0.0, max_v_sigma = 0.0;
};

/// Monte-Carlo study: observations are re-simulated for every run (split
/// streams), the EM initializer is derived from the same master seed, and
/// runs execute in parallel. Estimates are aligned to the generating model
/// before averaging.
inline McStudyResult mc_study(const hmm::HmmParams& model, int t_count,
                              int n_mc, const hmm::EmOptions& em_opts,
                              std::uint64_t seed) {
  if (n_mc < 1) throw DomainError("mc-study: N_mc >= 1 required");
  const int s = model.n_states();

  auto one_run = [&](int run_index) -> McRunSummary {
    McRunSummary out;
    out.seed = Rng(seed, 0x6d63).split(run_index).next_u64();
    try {
      const sampling::Simulation sim =
          sampling::simulate_hmm(model, t_count, out.seed);
      const hmm::HmmParams init =
          hmm::default_init(model.family, sim.obs, s, seed);
      hmm::EmResult fit = hmm::em_fit(init, sim.obs, em_opts);
      out.params = hmm::align_labels(fit.params, model.emissions);
      out.init_loglik = fit.loglik_trace.front();
      out.final_loglik = fit.final_loglik;
      out.iterations = fit.iterations;
    } catch (const Error& e) {
      out.failed = true;
      out.error = e.what();
    }
    return out;
  };

  std::vector<std::future<McRunSummary>> futures;
  futures.reserve(n_mc);
  for (int i = 0; i < n_mc; ++i)
    futures.push_back(std::async(std::launch::async, one_run, i));

  McStudyResult result;
  for (auto& f : futures) result.runs.push_back(f.get());
  for (const auto& r : result.runs)
    if (r.failed) ++result.n_failed;
  const int n_ok = n_mc - result.n_failed;
  if (n_ok == 0) throw DegeneracyError("mc-study: every run failed", 0);

  // moments over successful runs, aggregated in run order (deterministic)
  result.e_p = Eigen::MatrixXd::Zero(s, s);
  result.v_p = Eigen::MatrixXd::Zero(s, s);
  result.e_sigma = Eigen::VectorXd::Zero(s);
  result.v_sigma = Eigen::VectorXd::Zero(s);
  std::vector<std::vector<double>> coords(s);
  for (const auto& r : result.runs) {
    if (r.failed) continue;
    result.e_p += r.params.P;
    result.v_p += r.params.P.cwiseProduct(r.params.P);
    for (int a = 0; a < s; ++a) {
      result.e_sigma[a] += r.params.emissions[a].sigma;
      result.v_sigma[a] +=
          r.params.emissions[a].sigma * r.params.emissions[a].sigma;
      std::vector<double> c;
      io::detail::append_coords(r.params.emissions[a].ybar, c);
      if (coords[a].empty()) coords[a].assign(2 * c.size(), 0.0);
      for (std::size_t i = 0; i < c.size(); ++i) {
        coords[a][2 * i] += c[i];
        coords[a][2 * i + 1] += c[i] * c[i];
      }
    }
  }
  result.e_p /= n_ok;
  result.v_p = result.v_p / n_ok - result.e_p.cwiseProduct(result.e_p);
  result.e_sigma /= n_ok;
  result.v_sigma =
      result.v_sigma / n_ok - result.e_sigma.cwiseProduct(result.e_sigma);
  result.e_ybar.resize(s);
  result.v_ybar.resize(s);
  for (int a = 0; a < s; ++a) {
    const std::size_t k = coords[a].size() / 2;
    result.e_ybar[a].resize(k);
    result.v_ybar[a].resize(k);
    double var_sum = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      const double mean = coords[a][2 * i] / n_ok;
      result.e_ybar[a][i] = mean;
      result.v_ybar[a][i] = coords[a][2 * i + 1] / n_ok - mean * mean;
      var_sum += result.v_ybar[a][i];
    }
    result.max_v_ybar = std::max(result.max_v_ybar, var_sum);
  }
  result.max_v_p = result.v_p.maxCoeff();
  result.max_v_sigma = result.v_sigma.maxCoeff();
  return result;
}

inline json mc_study_to_json(const McStudyResult& r) {
  json j;
  j["runs"] = r.runs.size();
  j["failed"] = r.n_failed;
  auto mat = [](const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index a = 0; a < m.rows(); ++a) {
      json row = json::array();
      for (Eigen::Index b = 0; b < m.cols(); ++b) row.push_back(m(a, b));
      rows.push_back(row);
    }
    return rows;
  };
  j["E_P"] = mat(r.e_p);
  j["V_P"] = mat(r.v_p);
  j["max_V_P"] = r.max_v_p;
  j["E_ybar"] = r.e_ybar;
  j["V_ybar"] = r.v_ybar;
  j["max_V_ybar"] = r.max_v_ybar;
  j["E_sigma"] = std::vector<double>(r.e_sigma.data(),
                                     r.e_sigma.data() + r.e_sigma.size());
  j["V_sigma"] = std::vector<double>(r.v_sigma.data(),
                                     r.v_sigma.data() + r.v_sigma.size());
  j["max_V_sigma"] = r.max_v_sigma;
  j["per_run"] = json::array();
  for (const auto& run : r.runs) {
    json rj;
    rj["seed"] = run.seed;
    rj["failed"] = run.failed;
    if (run.failed) {
      rj["error"] = run.error;
    } else {
      rj["init_loglik"] = run.init_loglik;
      rj["final_loglik"] = run.final_loglik;
      rj["iterations"] = run.iterations;
    }
    j["per_run"].push_back(rj);
  }
  return j;
}

inline int run(std::vector<std::string> args) {
  CLI::App app{"Hidden Markov chains and fields with manifold observations"};
  app.require_subcommand(1);

  std::string model_path, preset, obs_path, out_dir = ".";
  int t_count = 10000, n_mc = 5, n_em = 300, n_states = 0;
  double tol = 1e-6, sigma_scale = 1.0;
  std::uint64_t seed = 1;

  CLI::App* sim = app.add_subcommand("simulate",
                                     "simulate a hidden chain and emissions");
  sim->add_option("--model", model_path, "model JSON path");
  sim->add_option("--preset", preset, "built-in preset (paper-face)");
  sim->add_option("--T", t_count, "chain length");
  sim->add_option("--seed", seed, "RNG seed");
  sim->add_option("--sigma-scale", sigma_scale, "scale multiplier");
  sim->add_option("--out", out_dir, "output directory");

  CLI::App* fit = app.add_subcommand("fit", "EM fit of a chain model");
  fit->add_option("--obs", obs_path, "observations CSV")->required();
  fit->add_option("--model", model_path, "initial model JSON");
  fit->add_option("--states", n_states,
                  "state count for the default initializer");
  fit->add_option("--n-em", n_em, "max EM iterations");
  fit->add_option("--tol", tol, "convergence tolerance");
  fit->add_option("--seed", seed, "initializer seed");
  fit->add_option("--out", out_dir, "output directory");

  CLI::App* mc = app.add_subcommand("mc-study",
                                    "Monte-Carlo study of the EM estimates");
  mc->add_option("--model", model_path, "generating model JSON");
  mc->add_option("--preset", preset, "built-in preset (paper-face)");
  mc->add_option("--T", t_count, "chain length per run");
  mc->add_option("--n-mc", n_mc, "number of runs");
  mc->add_option("--n-em", n_em, "max EM iterations per run");
  mc->add_option("--tol", tol, "convergence tolerance");
  mc->add_option("--seed", seed, "master seed");
  mc->add_option("--out", out_dir, "output directory");

  std::string suite;
  CLI::App* oracle = app.add_subcommand("oracle", "run a verification suite");
  oracle
      ->add_option("suite", suite,
                   "fb-bruteforce | normalizers | mstep-optimality | mrf-exact")
      ->required();

  try {
    std::vector<const char*> argv;
    argv.push_back("mhmm");
    for (const std::string& a : args) argv.push_back(a.c_str());
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*sim) {
      hmm::HmmParams model = load_model_or_preset(model_path, preset);
      if (sigma_scale != 1.0) {
        for (auto& e : model.emissions) e.sigma *= sigma_scale;
        model.validate();
      }
      std::filesystem::create_directories(out_dir);
      const sampling::Simulation data =
          sampling::simulate_hmm(model, t_count, seed);
      io::save_json(out_dir + "/model.json", io::model_to_json(model));
      io::write_observations(out_dir + "/observations.csv", data.obs,
                             &data.states);
      if (model.family->manifold() == geometry::Manifold::Disk) {
        std::ofstream scatter(out_dir + "/scatter.csv");
        if (!scatter) throw IoError("cannot write scatter.csv");
        scatter << "re,im,state\n";
        for (std::size_t t = 0; t < data.obs.size(); ++t)
          scatter << io::format_double(data.obs[t].disk_coord().real()) << ","
                  << io::format_double(data.obs[t].disk_coord().imag()) << ","
                  << (data.states[t] + 1) << "\n";
      }
      std::cout << "wrote " << out_dir << "/observations.csv ("
                << data.obs.size() << " rows)\n";
      return 0;
    }

    if (*fit) {
      const io::ObservationFile file = io::read_observations(obs_path);
      hmm::HmmParams init;
      if (!model_path.empty()) {
        init = io::model_from_json(io::load_json(model_path));
      } else {
        if (n_states < 1)
          throw DomainError("fit: provide --model or --states");
        auto family = geometry::make_family(
            file.obs[0].manifold() == geometry::Manifold::Disk
                ? "disk_gaussian"
                : (file.obs[0].manifold() == geometry::Manifold::Sphere
                       ? "vmf"
                       : "spd_gaussian"),
            file.obs[0].manifold() == geometry::Manifold::Sphere
                ? static_cast<int>(file.obs[0].sphere_coords().size())
                : 2);
        init = hmm::default_init(family, file.obs, n_states, seed);
      }
      hmm::EmOptions opts;
      opts.max_iterations = n_em;
      opts.tolerance = tol;
      hmm::EmResult result = hmm::em_fit(init, file.obs, opts);
      result.params = hmm::align_labels(result.params, init.emissions);
      std::filesystem::create_directories(out_dir);
      io::save_json(out_dir + "/fitted.json", io::fit_result_to_json(result));
      std::cout << "fit: " << result.iterations << " iterations, loglik "
                << result.final_loglik << "\n";
      return 0;
    }

    if (*mc) {
      const hmm::HmmParams model = load_model_or_preset(model_path, preset);
      hmm::EmOptions opts;
      opts.max_iterations = n_em;
      opts.tolerance = tol;
      const McStudyResult result = mc_study(model, t_count, n_mc, opts, seed);
      std::filesystem::create_directories(out_dir);
      io::save_json(out_dir + "/mc_study.json", mc_study_to_json(result));
      std::cout << "mc-study: " << (result.runs.size() - result.n_failed)
                << "/" << result.runs.size() << " runs, max V_mc(P) = "
                << result.max_v_p << "\n";
      return 0;
    }

    if (*oracle) {
      const OracleReport report = run_oracle_suite(suite);
      std::cout << oracle_report_to_json(report).dump(2) << "\n";
      return report.pass ? 0 : 3;
    }
  } catch (const DegeneracyError& e) {
    std::cerr << "error (numerical): " << e.what() << "\n";
    return 3;
  } catch (const IoError& e) {
    std::cerr << "error (io): " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

}  // namespace mhmm::cli
