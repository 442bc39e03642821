// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.
//
//   acceptance [--only 1,4,7] [--threads N]

#include "skewmeet/calibration.hpp"
#include "skewmeet/cli.hpp"
#include "skewmeet/criterion.hpp"
#include "skewmeet/experiments.hpp"
#include "skewmeet/geometry.hpp"
#include "skewmeet/sde_engine.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace skewmeet;
namespace cal = skewmeet::calibration;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string num(double x, int precision = 6) {
  std::ostringstream ss;
  ss.precision(precision);
  ss << x;
  return ss.str();
}

const std::vector<double> kInterior{-0.9, -0.7, -0.5, -0.3, -0.1, 0.2, 0.4, 0.6, 0.8};

Outcome exact_formula_suite() {
  const auto start = Clock::now();
  int sign_mismatch = 0;
  double worst = 0.0;
  for (double k1 : kInterior) {
    for (double k2 : kInterior) {
      for (double a : kInterior) {
        const ChainSolution generic = solve_chain(build_four_ray_config(k1, k2, a));
        const double xi = membrane_angle(a);
        const double D = 2.0 * ((1.0 - k1 * k2) * xi + (1.0 + k1 * k2) * (std::numbers::pi - xi));
        const double cot = std::cos(xi) / std::sin(xi);
        const double closed = 2.0 * xi * (std::numbers::pi - xi) / D * (-k1 * k2 * cot);
        worst = std::max(worst, std::abs(generic.S - closed));
        const bool hit = generic.S > 0.0;
        if (hit != (k1 * k2 * a > 0.0)) ++sign_mismatch;
      }
    }
  }
  const double elapsed = seconds_since(start);
  return {sign_mismatch == 0 && worst <= 1e-10 && elapsed < 1.0,
          "729 cells, sign mismatches " + std::to_string(sign_mismatch) + ", max |S - closed| " +
              num(worst, 3) + ", " + num(elapsed, 3) + " s"};
}

Outcome closed_form_pi_suite() {
  double worst = 0.0;
  for (double k1 : kInterior) {
    for (double k2 : kInterior) {
      for (double a : kInterior) {
        const ChainSolution generic = solve_chain(build_four_ray_config(k1, k2, a));
        const auto cf = closed_form_pi_four_ray(k1, k2, membrane_angle(a));
        for (std::size_t k = 0; k < 4; ++k) {
          worst = std::max(worst, std::abs(generic.pi[k] - cf.pi[k]));
        }
      }
    }
  }
  bool reflecting = true;
  bool zero = true;
  for (double a : {-0.8, -0.3, 0.3, 0.5, 0.8}) {
    const ChainSolution r = analyze_four_ray(1.0, 1.0, a);
    reflecting = reflecting && r.pi == std::vector<double>{0.5, 0.5, 0.0, 0.0};
    const ChainSolution z = analyze_four_ray(0.0, 0.6, a);
    zero = zero && z.pi == std::vector<double>{0.0, 0.5, 0.0, 0.5} && z.S == 0.0;
  }
  return {worst <= 1e-10 && reflecting && zero,
          "max |pi_closed - pi_solve| " + num(worst, 3) + ", k1=k2=1 -> (1/2,1/2,0,0) " +
              (reflecting ? "exact" : "WRONG") + ", k1=0 -> (0,1/2,0,1/2) with S=0 " +
              (zero ? "exact" : "WRONG")};
}

Outcome chain_simulation_suite() {
  const auto start = Clock::now();
  std::mt19937_64 rng(20240607);
  std::uniform_real_distribution<double> kappa(-0.95, 0.95);
  std::uniform_real_distribution<double> alpha(-0.95, 0.95);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  for (int c = 0; c < 5; ++c) {
    const double k1 = kappa(rng), k2 = kappa(rng), a = alpha(rng);
    const ChainSolution sol = solve_chain(build_four_ray_config(k1, k2, a));
    std::vector<std::uint64_t> visits(4, 0);
    std::size_t state = 0;
    const std::uint64_t steps = 1'000'000;
    for (std::uint64_t i = 0; i < steps; ++i) {
      state = u(rng) < sol.p_tilde[state] ? (state + 1) % 4 : (state + 3) % 4;
      ++visits[state];
    }
    for (std::size_t k = 0; k < 4; ++k) {
      worst = std::max(worst, std::abs(static_cast<double>(visits[k]) / steps - sol.pi[k]));
    }
  }
  const double elapsed = seconds_since(start);
  return {worst <= 5e-3 && elapsed < 10.0,
          "5 configs x 1e6 steps, max |freq - pi| " + num(worst, 3) + ", " + num(elapsed, 3) + " s"};
}

Outcome geometry_suite() {
  double worst_identity = 0.0;
  double worst_angle = 0.0;
  for (double a = -0.99; a < 0.995; a += 0.01) {
    const CorrelationModel m = build_correlation_model(a);
    const Eigen::Matrix2d aba = m.whitening() * m.covariance * m.whitening();
    worst_identity =
        std::max(worst_identity, (aba - Eigen::Matrix2d::Identity()).cwiseAbs().maxCoeff());
    const Eigen::Vector2d u = apply_whitening(m, {1.0, 0.0});
    const Eigen::Vector2d v = apply_whitening(m, {0.0, 1.0});
    const double angle = std::atan2(std::abs(u.x() * v.y() - u.y() * v.x()), u.dot(v));
    worst_angle = std::max(worst_angle, std::abs(angle - std::acos(-a)));
  }
  return {worst_identity <= 1e-12 && worst_angle <= 1e-10,
          "199 alphas, max |ABA - I| " + num(worst_identity, 3) + ", max angle error " +
              num(worst_angle, 3)};
}

Outcome marginal_suite(unsigned threads) {
  const auto start = Clock::now();
  const std::vector<double> kappas{-0.5, 0.0, 0.5, 1.0};
  const auto rows = marginal_law_suite(kappas, 1.0, 1e-3, 100000, cal::kDefaultSeed, threads);
  bool ok = true;
  std::string detail;
  for (const auto& r : rows) {
    const bool row_ok = r.kappa == 1.0 ? r.p_hat >= 0.999
                                       : std::abs(r.p_hat - r.expected) <= 0.01;
    ok = ok && row_ok;
    detail += "k=" + num(r.kappa) + ": " + num(r.p_hat, 5) + " ";
  }
  const double elapsed = seconds_since(start);
  ok = ok && elapsed <= 120.0;
  return {ok, detail + "(1e5 trials each), " + num(elapsed, 3) + " s"};
}

Outcome decorrelation_suite() {
  bool ok = true;
  std::string detail;
  for (double a : {-0.9, -0.5, 0.5, 0.9}) {
    const auto r = decorrelation_test(a, 100000, cal::kDefaultSeed);
    ok = ok && r.pass;
    detail += "a=" + num(a) + ": " + num(r.rho_hat, 3) + " ";
  }
  return {ok, detail + "(bound " + num(3.0 / std::sqrt(1e5), 3) + ")"};
}

Outcome local_time_suite(unsigned threads) {
  const auto start = Clock::now();
  const double eps = 0.05, dt = 1e-3;
  const std::uint64_t trials = 100000;
  const auto values = parallel_map(trials, threads, [&](std::uint64_t i) {
    return simulate_single(1.0, 0.0, 1.0, dt, eps, TrialStream(cal::kDefaultSeed, i)).local_time;
  });
  double sum = 0.0, sum2 = 0.0;
  for (double v : values) {
    sum += v;
    sum2 += v * v;
  }
  const double mean = sum / trials;
  const double se = std::sqrt((sum2 / trials - mean * mean) / trials);
  // Exact mean of the estimator: (1/2eps) sum_{i<N} dt P(|W(t_i)| <= eps).
  double exact = 0.0;
  for (int i = 0; i < 1000; ++i) {
    exact += i == 0 ? 1.0 : std::erf(eps / std::sqrt(2.0 * i * dt));
  }
  exact *= dt / (2.0 * eps);
  const double target = std::sqrt(2.0 / std::numbers::pi);
  return {std::abs(mean - target) <= 0.02,
          "mean " + num(mean, 5) + " +- " + num(se, 2) + " vs " + num(target, 5) +
              " (|diff| " + num(std::abs(mean - target), 4) + ", tolerance 0.02; exact estimator mean " +
              num(exact, 5) + "), " + num(seconds_since(start), 3) + " s"};
}

SimParams budget_params(double k1, double k2, double a) {
  SimParams p;
  p.kappa1 = k1;
  p.kappa2 = k2;
  p.alpha = a;
  p.x0 = {1.0, 1.0};
  p.dt = cal::kDt;
  p.horizon = cal::kHorizon;
  p.seed = cal::kDefaultSeed;
  return p;
}

Outcome dichotomy_suite(unsigned threads) {
  const auto start = Clock::now();
  const std::vector<double> grid(cal::kDeltaGrid.begin(), cal::kDeltaGrid.end());
  const ContrastTable t = dichotomy_contrast(budget_params(0.5, 0.5, 0.5),
                                             budget_params(0.5, -0.5, 0.5), grid, cal::kTrials,
                                             threads);
  const auto pos = t.positive.retention();
  const auto neg = t.negative.retention();
  bool pos_ok = true, neg_ok = true;
  std::string detail = "hit_prob pos";
  for (double p : t.positive.hit_prob) detail += " " + num(p, 4);
  detail += " | neg";
  for (double p : t.negative.hit_prob) detail += " " + num(p, 4);
  detail += " | retention pos";
  for (double r : pos) {
    pos_ok = pos_ok && r >= cal::kHitRetentionMin;
    detail += " " + num(r, 3);
  }
  detail += " neg";
  for (double r : neg) {
    neg_ok = neg_ok && r <= cal::kNoHitRetentionMax;
    detail += " " + num(r, 3);
  }
  const ContrastRow& last = t.terminal();
  const bool ratio_ok = last.ratio >= cal::kTerminalRatioMin;
  detail += " | terminal ratio " + num(last.ratio, 3) + " [" + num(last.ratio_ci.lo, 3) + ", " +
            num(last.ratio_ci.hi, 3) + "]";
  detail += std::string(" | pos>=0.8 ") + (pos_ok ? "ok" : "no") + ", neg<=0.6 " +
            (neg_ok ? "ok" : "no") + ", ratio>=5 " + (ratio_ok ? "ok" : "no") + ", " +
            num(seconds_since(start), 4) + " s";
  return {pos_ok && neg_ok && ratio_ok && seconds_since(start) <= 600.0, detail};
}

Outcome sweep_suite(unsigned threads) {
  const auto start = Clock::now();
  const std::vector<double> values{-0.5, 0.25, 0.5};
  const std::vector<double> grid(cal::kDeltaGrid.begin(), cal::kDeltaGrid.end());
  const SweepResult res =
      sweep({values, values, values}, budget_params(0.0, 0.0, 0.0), grid, cal::kTrials, threads);
  std::string discordant;
  for (const auto& row : res.rows) {
    if (row.report && !row.concordant) {
      discordant += " (" + num(row.kappa1) + "," + num(row.kappa2) + "," + num(row.alpha) +
                    " S=" + num(row.S, 3) + " ret=" + num(row.retention, 3) +
                    (row.near_zero ? " near-zero" : "") + ")";
    }
  }
  const bool ok = res.evaluated == 27 && res.concordant >= cal::kSweepMinConcordant &&
                  res.discordance_near_zero;
  return {ok, std::to_string(res.concordant) + "/" + std::to_string(res.evaluated) +
                  " concordant (threshold " + num(cal::kSweepRetentionThreshold) +
                  "), discordant:" + (discordant.empty() ? " none" : discordant) + ", " +
                  num(seconds_since(start), 4) + " s"};
}

std::string run_to_file(const std::vector<std::string>& args, const std::string& path) {
  auto full = args;
  full.push_back("--out");
  full.push_back(path);
  std::ostringstream out, err;
  const int code = cli::main(full, out, err);
  if (code != 0) throw std::runtime_error("command failed: " + err.str());
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  std::string text = ss.str();
  // The out path is itself part of the echoed configuration.
  const std::string marker = path;
  for (auto pos = text.find(marker); pos != std::string::npos; pos = text.find(marker)) {
    text.replace(pos, marker.size(), "<out>");
  }
  return text;
}

Outcome determinism_suite(unsigned threads) {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "skewmeet_acceptance";
  fs::create_directories(dir);
  const std::string t = threads == 0 ? "auto" : std::to_string(threads);
  const std::vector<std::vector<std::string>> commands{
      {"criterion", "--kappa1", "0.5", "--kappa2", "-0.25", "--alpha", "0.7"},
      {"hitprob", "--kappa2", "-0.5", "--horizon", "5", "--trials", "400", "--threads", t},
      {"sweep", "--horizon", "2", "--trials", "100", "--threads", t},
  };
  int identical = 0;
  for (std::size_t c = 0; c < commands.size(); ++c) {
    const auto a = run_to_file(commands[c], (dir / ("a" + std::to_string(c) + ".csv")).string());
    const auto b = run_to_file(commands[c], (dir / ("b" + std::to_string(c) + ".csv")).string());
    identical += a == b;
  }
  fs::remove_all(dir);
  return {identical == static_cast<int>(commands.size()),
          std::to_string(identical) + "/" + std::to_string(commands.size()) +
              " commands byte-identical on repeat (criterion, hitprob, 27-cell sweep)"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"skewmeet acceptance suite"};
  std::vector<int> only;
  unsigned threads = 0;
  app.add_option("--only", only, "criterion numbers to run")->delimiter(',');
  app.add_option("--threads", threads, "worker threads (0 = auto)");
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"exact formula sign law", exact_formula_suite},
      {"closed-form pi vs linear solve", closed_form_pi_suite},
      {"chain-simulation oracle", chain_simulation_suite},
      {"geometry transform", geometry_suite},
      {"engine marginal law", [&] { return marginal_suite(threads); }},
      {"decorrelation", decorrelation_suite},
      {"local time", [&] { return local_time_suite(threads); }},
      {"dichotomy contrast", [&] { return dichotomy_suite(threads); }},
      {"sweep concordance", [&] { return sweep_suite(threads); }},
      {"determinism", [&] { return determinism_suite(threads); }},
  };
  const std::set<int> selected(only.begin(), only.end());
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("%s [%d] %s: %s\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first.c_str(),
                o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
