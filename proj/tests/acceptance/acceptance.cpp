// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <random>
#include <string>
#include <vector>

#include "lfdc/agent_sim.hpp"
#include "lfdc/deconvolve.hpp"
#include "lfdc/pde_sim.hpp"
#include "lfdc/scenario.hpp"
#include "oracles.hpp"

using namespace lfdc;
namespace sc = lfdc::scenario;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(int id, const std::string& title, const Outcome& o, double sec) {
  std::printf("[%s] criterion %2d  %-34s %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", id, title.c_str(),
              o.detail.c_str(), sec);
  std::fflush(stdout);
  if (!o.pass) ++failures;
}

void criterion(int id, const std::string& title, const std::function<Outcome()>& body) {
  const auto t0 = Clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  report(id, title, o, seconds_since(t0));
}

std::string f(const char* fmt, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, fmt, args...);
  return buf;
}

SimConfig builtin_sim(const std::string& name, const std::string& label = "") {
  const auto plan = sc::make_plan(sc::load_config(name));
  for (const auto& v : plan.pde)
    if (v.label == label || label.empty()) return v.sim;
  throw std::runtime_error("no variant " + label + " in " + name);
}

struct TimedRecord {
  SimRecord rec;
  double sec = 0.0;
};

TimedRecord timed_run(const SimConfig& c) {
  const auto t0 = Clock::now();
  TimedRecord r{run(c), 0.0};
  r.sec = seconds_since(t0);
  return r;
}

// Every PDE run contributes to the conservation check of criterion 10.
double worst_mass_drift = 0.0;
std::size_t pde_runs = 0;

void track(const SimRecord& r) {
  worst_mass_drift = std::max({worst_mass_drift, r.max_mass_drift_L, r.max_mass_drift_F});
  ++pde_runs;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(is), {});
}

// Compares every CSV under two directory trees byte for byte.
bool same_csvs(const fs::path& a, const fs::path& b, std::size_t& compared) {
  compared = 0;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (e.path().extension() != ".csv") continue;
    const auto other = b / fs::relative(e.path(), a);
    if (!fs::exists(other) || slurp(e.path()) != slurp(other)) return false;
    ++compared;
  }
  return compared > 0;
}

Outcome feasibility_closed_form() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  for (double D : {0.01, 0.03, 0.05, 0.1, 0.2})
    for (double kappa : {0.2, 0.8, 1.8, 3.0, 5.0}) {
      const double grid_value = von_mises_min_leader_mass(kappa, D, pi, 500);
      const double exact = oracle::min_leader_mass(D, kappa, pi);
      worst = std::max(worst, std::abs(grid_value - exact) / exact);
    }
  const double sec = seconds_since(t0);
  return {worst < 2e-4 && sec < 1.0, f("max rel err %.2e (< 2e-4), %.3f s (< 1 s)", worst, sec)};
}

Outcome reference_synthesis() {
  const auto t0 = Clock::now();
  const auto g = PeriodicGrid::line(500);
  const double D = 0.05, kappa = 1.8, L = pi, M_L = 0.4;
  TargetSpec target(von_mises_1d(g, kappa, 0.0, 1.0 - M_L), 1.0 - M_L, D, KernelSpec::repulsive(L));
  std::vector<double> expected(g.n());
  for (std::size_t i = 0; i < g.n(); ++i) expected[i] = oracle::reference_leader_density(g.node(i), D, kappa, L, M_L);
  auto err = [&](const PeriodicField& r) {
    return oracle::rel_l2(std::vector<double>(r.values().begin(), r.values().end()), expected);
  };
  // Desired velocity deconvolved by the ODE route and by the spectral route.
  const auto v = desired_velocity(target);
  const auto table = shared_kernel_table(target.kernel(), g);
  const double e_ode = err(deconvolve_1d(v, L, MassRule{M_L}));
  const double e_spec = err(deconvolve_spectral(v, *table, MassRule{M_L}));
  const double e_ref = err(reference_leader_density_1d(target));
  const double worst = std::max({e_ode, e_spec, e_ref});
  const double sec = seconds_since(t0);
  return {worst < 1e-4 && sec < 1.0,
          f("rel l2: ODE %.2e, spectral %.2e, closed form %.2e (< 1e-4), %.3f s (< 1 s)", e_ode, e_spec, e_ref, sec)};
}

Outcome leader_rate() {
  bool ok = true;
  std::string detail;
  for (double K : {0.5, 1.0, 5.0}) {
    SimConfig c = builtin_sim("monomodal_1d_ff");
    c.K_L = K;
    c.n_steps = 10000;
    c.record_every = 10;
    c.monitor_lyapunov = false;
    const auto r = timed_run(c);
    track(r.rec);
    // Fit log ||e_L|| against t while the error is well above round-off.
    const double e0 = std::sqrt(r.rec.e2_L[0]);
    double st = 0, sy = 0, stt = 0, sty = 0;
    std::size_t m = 0;
    for (std::size_t k = 0; k < r.rec.times.size(); ++k) {
      const double e = std::sqrt(r.rec.e2_L[k]);
      if (e < 1e-9 * e0) break;
      const double t = r.rec.times[k], y = std::log(e);
      st += t, sy += y, stt += t * t, sty += t * y, ++m;
    }
    const double md = static_cast<double>(m);
    const double rate = -(md * sty - st * sy) / (md * stt - st * st);
    const double rel = std::abs(rate / K - 1.0);
    ok = ok && r.rec.completed && rel < 0.01 && r.sec < 10.0;
    detail += f("K=%g: rate %.4f (%.2f%%) %.1f s; ", K, rate, 100 * rel, r.sec);
  }
  return {ok, detail + "tol 1%, < 10 s each"};
}

std::vector<TimedRecord> monomodal_runs;

Outcome monomodal_1d() {
  bool ok = true;
  std::string detail;
  for (const char* name : {"monomodal_1d_ff", "monomodal_1d_rg"}) {
    const auto r = timed_run(builtin_sim(name));
    track(r.rec);
    const double E = r.rec.E_F.back(), KL = r.rec.KL_F.back();
    ok = ok && r.rec.completed && E < 2.0 && KL < 1e-3 && r.sec < 300.0;
    detail += f("%s: E_F %.3f%% KL_F %.2e %.0f s; ", name + 13, E, KL, r.sec);
    monomodal_runs.push_back(r);
  }
  return {ok, detail + "need E_F < 2%, KL < 1e-3, < 300 s"};
}

Outcome disturbance() {
  const auto t0 = Clock::now();
  double E[3];
  const char* labels[3] = {"optimal", "conservative", "feed_forward"};
  const double expected[3] = {2.0, 10.0, 20.0};
  bool ok = true;
  for (int i = 0; i < 3; ++i) {
    const auto r = timed_run(builtin_sim("disturbance_robustness", labels[i]));
    track(r.rec);
    E[i] = steady_value(r.rec.E_F);
    ok = ok && r.rec.completed && std::abs(E[i] - expected[i]) <= 5.0;
  }
  ok = ok && E[0] < E[1] && E[1] < E[2];
  const double sec = seconds_since(t0);
  ok = ok && sec < 900.0;
  return {ok, f("steady E_F optimal %.2f%% < conservative %.2f%% < ff %.2f%% (targets 2/10/20 +-5), %.0f s", E[0],
                E[1], E[2], sec)};
}

Outcome mismatch() {
  const auto t0 = Clock::now();
  const auto ff = timed_run(builtin_sim("kernel_mismatch", "feed_forward"));
  const auto rg = timed_run(builtin_sim("kernel_mismatch", "reference_governor"));
  track(ff.rec);
  track(rg.rec);
  const double Eff = steady_value(ff.rec.E_F), Erg = steady_value(rg.rec.E_F);
  const double sec = seconds_since(t0);
  const bool ok = ff.rec.completed && rg.rec.completed && Erg < Eff && std::abs(Erg - 45.0) <= 7.0 &&
                  std::abs(Eff - 55.0) <= 7.0 && sec < 600.0;
  return {ok, f("steady E_F governor %.2f%% (45+-7) < ff %.2f%% (55+-7), %.0f s", Erg, Eff, sec)};
}

Outcome lyapunov() {
  if (monomodal_runs.size() != 2) return {false, "criterion-4 runs unavailable"};
  bool ok = true;
  std::string detail;
  for (const auto& r : monomodal_runs) {
    ok = ok && r.rec.lyapunov_violations == 0 && r.rec.max_lyap_residual <= 1e-3;
    detail += f("max residual %.2e, %zu violations; ", r.rec.max_lyap_residual, r.rec.lyapunov_violations);
  }
  const auto& first = monomodal_runs.front().rec;
  detail += f("gate ||g1||_inf = %.4f %s 2", first.g1_inf, first.lyapunov_gate ? "<" : ">=");
  return {ok, detail};
}

Outcome discrete_ensemble() {
  const auto plan = sc::make_plan(sc::load_config("discrete_ensemble"));
  const auto t0 = Clock::now();
  const auto full = run_discrete(plan.ensemble.at(0).cfg);
  const double full_sec = seconds_since(t0);

  auto smoke_cfg = sc::load_config("discrete_ensemble");
  smoke_cfg["N"] = 250;
  smoke_cfg["N_L"] = nlohmann::json::array({100});
  smoke_cfg["steps"] = 20000;
  const auto smoke_plan = sc::make_plan(smoke_cfg);
  const auto t1 = Clock::now();
  const auto smoke = run_discrete(smoke_plan.ensemble.at(0).cfg);
  const double smoke_sec = seconds_since(t1);

  for (const auto* e : {&full, &smoke})
    for (const auto& t : e->trials) worst_mass_drift = std::max(worst_mass_drift, t.max_mass_error);
  const bool ok = full.failed == 0 && smoke.failed == 0 && full.mean_E_F < 5.0 && full_sec < 1800.0 &&
                  smoke.mean_E_F < 15.0 && smoke_sec < 120.0;
  return {ok, f("N_L=400: mean steady E_F %.2f%% (sd %.2f, %zu trials, < 5%%) %.0f s; smoke N=250: %.2f%% (< 15%%) "
                "%.0f s (< 120 s)",
                full.mean_E_F, full.std_E_F, full.trials.size(), full_sec, smoke.mean_E_F, smoke_sec)};
}

Outcome two_d() {
  const auto r = timed_run(builtin_sim("monomodal_2d_rg"));
  track(r.rec);
  const double E = r.rec.E_F.back();
  const double a = steady_value(r.rec.alpha);
  // alpha at t = 50 for reference
  double a50 = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t k = 0; k < r.rec.times.size(); ++k)
    if (r.rec.times[k] >= 50.0 - 1e-9) {
      a50 = r.rec.alpha[k];
      break;
    }
  const bool ok = r.rec.completed && E < 5.0 && a >= 0.1 && a <= 0.3 && r.sec < 600.0;
  return {ok, f("final E_F %.4f%% (< 5%%), steady alpha %.3f (need [0.1, 0.3]; alpha(t=50) %.3f), %.0f s", E, a, a50,
                r.sec)};
}

Outcome conservation_and_determinism() {
  const bool mass_ok = worst_mass_drift < 1e-8 && pde_runs > 0;

  const auto tmp = fs::temp_directory_path();
  bool same = true;
  std::size_t files = 0;
  for (const char* name : {"disturbance_robustness", "discrete_ensemble", "monomodal_2d_rg"}) {
    auto cfg = sc::load_config(name);
    cfg["steps"] = std::string(name) == "monomodal_2d_rg" ? 300 : 3000;
    if (std::string(name) == "discrete_ensemble") cfg["n_trials"] = 2;
    const auto plan = sc::make_plan(cfg);
    const auto a = tmp / ("lfdc_accept_a_" + plan.name), b = tmp / ("lfdc_accept_b_" + plan.name);
    fs::remove_all(a);
    fs::remove_all(b);
    sc::execute(plan, a);
    sc::execute(plan, b);
    std::size_t n = 0;
    same = same && same_csvs(a, b, n);
    files += n;
    fs::remove_all(a);
    fs::remove_all(b);
  }
  return {mass_ok && same, f("max mass drift %.2e over %zu PDE runs and all agent estimates (< 1e-8); %zu CSVs %s",
                             worst_mass_drift, pde_runs, files, same ? "byte-identical" : "DIFFER")};
}

Outcome oracle_suite() {
  const auto t0 = Clock::now();
  // 1D round trip through the ODE deconvolution at n = 500.
  const auto g1 = PeriodicGrid::line(500);
  const auto rho1 = oracle::smooth_density(g1, 11, 4, 0.4);
  const auto table1 = shared_kernel_table(KernelSpec::repulsive(pi), g1);
  const auto back1 = deconvolve_1d(convolve(*table1, rho1), pi, MassRule{0.4});
  const double err1 = relative_l2_error(back1, rho1);

  // 2D round trip through the spectral route on 50 x 50.
  const auto g2 = PeriodicGrid::square(50);
  const auto rho2 = oracle::smooth_density(g2, 12, 3, 0.6);
  const auto table2 = shared_kernel_table(KernelSpec::repulsive(pi, 2), g2);
  const auto back2 = deconvolve_2d(convolve_2d(*table2, rho2), *table2, MassRule{0.6});
  const double err2 = relative_l2_error(back2, rho2);

  // Closed-form periodic kernel against the image series truncated at K = 20.
  double err_series = 0.0;
  // Length scales used by the scenarios; the K = 20 tail grows like e^{-40 pi / L}.
  for (double L : {pi / 6, 0.5, 1.0, 2.0, pi})
    for (int i = 0; i < 200; ++i) {
      const double x = -pi + (i + 0.5) * two_pi / 200;
      const double s = periodize_series([&](double y) { return repulsive_free(y, L); }, x, 20);
      err_series = std::max(err_series, std::abs(s - oracle::kernel_1d(x, L)));
    }

  // Brownian variance slope in 2D: E|X_t - X_0|^2 = 4 D t for pure diffusion.
  const double D = 0.05, dt = 1e-3;
  const std::size_t N = 20000, steps = 1000;
  std::mt19937_64 rng(2718);
  std::vector<double> dx(N, 0.0), dy(N, 0.0), x(N, 0.0), y(N, 0.0);
  double st = 0, sm = 0, stt = 0, stm = 0;
  std::size_t m = 0;
  const PeriodicField u(PeriodicGrid::line(16));
  AgentState sx{{}, x, 0}, sy{{}, y, 0};
  for (std::size_t k = 1; k <= steps; ++k) {
    const auto px = sx.followers, py = sy.followers;
    step_agents(sx, u, KernelSpec::repulsive(pi), D, dt, rng);
    step_agents(sy, u, KernelSpec::repulsive(pi), D, dt, rng);
    double msd = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
      dx[i] += wrap_displacement(sx.followers[i], px[i]).value();
      dy[i] += wrap_displacement(sy.followers[i], py[i]).value();
      msd += dx[i] * dx[i] + dy[i] * dy[i];
    }
    if (k % 50 == 0) {
      const double t = dt * k, v = msd / N;
      st += t, sm += v, stt += t * t, stm += t * v, ++m;
    }
  }
  const double md = static_cast<double>(m);
  const double slope = (md * stm - st * sm) / (md * stt - st * st);
  const double slope_err = std::abs(slope / (4 * D) - 1.0);
  const double sec = seconds_since(t0);
  const bool ok = err1 < 1e-4 && err2 < 1e-3 && err_series < 1e-10 && slope_err < 0.05 && sec < 60.0;
  return {ok, f("round trip 1D %.1e (< 1e-4), 2D %.1e (< 1e-3); series vs closed form %.1e (< 1e-10); "
                "MSD slope %.4f vs 4D = %.2f (%.1f%%, < 5%%)",
                err1, err2, err_series, slope, 4 * D, 100 * slope_err)};
}

}  // namespace

int main() {
  const auto t0 = Clock::now();
  criterion(1, "feasibility closed form", feasibility_closed_form);
  criterion(2, "reference synthesis", reference_synthesis);
  criterion(11, "oracle micro-suite", oracle_suite);
  criterion(3, "leader exponential law", leader_rate);
  criterion(4, "monomodal 1D trial", monomodal_1d);
  criterion(7, "Lyapunov monitor", lyapunov);
  criterion(5, "disturbance robustness ordering", disturbance);
  criterion(6, "kernel mismatch", mismatch);
  criterion(9, "2D trial", two_d);
  criterion(8, "discrete ensemble", discrete_ensemble);
  criterion(10, "conservation and determinism", conservation_and_determinism);
  std::printf("%d of 11 criteria failed, total %.0f s\n", failures, seconds_since(t0));
  return failures == 0 ? 0 : 1;
}
