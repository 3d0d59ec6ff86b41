#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "wavemap/diagnostics.hpp"
#include "wavemap/error.hpp"
#include "wavemap/io.hpp"
#include "wavemap/resolution.hpp"
#include "wavemap/scenario.hpp"
#include "wavemap/selftest.hpp"

namespace fs = std::filesystem;
using namespace wavemap;

namespace {

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

void print_row(const char* fmt, double a, double b) {
  std::printf(fmt, a, b);
  std::printf("\n");
}

int cmd_simulate(const std::vector<std::string>& configs, const std::string& out, int jobs) {
  if (configs.size() > 1 && !out.empty()) {
    std::cerr << "error: --out needs a single --config\n";
    return 1;
  }
  std::vector<int> codes(configs.size(), 0);
  std::mutex io;
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k; (k = next++) < configs.size();) {
      std::string line;
      try {
        const auto sc = load_scenario(configs[k]);
        const fs::path dir = out.empty() ? sc.output_dir : fs::path(out);
        const auto res = run_scenario(sc, dir);
        codes[k] = res.exit_code();
        line = configs[k] + ": " + res.status + " -> " + dir.string();
        for (const auto& w : res.warnings) line += "\n  warning: " + w;
        for (const auto& e : res.errors) line += "\n  error: " + e;
      } catch (const std::exception& e) {
        codes[k] = 1;
        line = configs[k] + ": error: " + e.what();
      }
      std::lock_guard<std::mutex> lock(io);
      std::cout << line << std::endl;
    }
  };
  const int n = std::max(1, std::min<int>(jobs, static_cast<int>(configs.size())));
  std::vector<std::thread> pool;
  for (int i = 1; i < n; ++i) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return *std::max_element(codes.begin(), codes.end());
}

int cmd_analyze(const std::string& dir, const std::string& ops, double lambda, double A, std::size_t count) {
  StoredTrajectory st;
  try {
    st = read_trajectory(dir);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  const auto& traj = st.traj;
  const Metric metric = st.metric.build();
  const bool linear = traj.flow == "linear";
  const EnergyModel model = linear ? EnergyModel::linear(traj.linear_slope) : EnergyModel::of(metric);
  const ConeRule rule = traj.blowup ? ConeRule::blowup : ConeRule::global;
  const double t_plus = traj.blowup ? traj.blowup->t_plus : 0.0;
  int code = 0;
  for (const auto& op : split_list(ops)) {
    std::printf("# %s\n", op.c_str());
    if (op == "energy") {
      const double e0 = total_energy(traj.frames.front(), model);
      std::printf("t E_total rel_drift\n");
      for (const auto& fr : traj.frames) {
        const double e = total_energy(fr, model);
        std::printf("%.6f %.12e %.3e\n", fr.time, e, e0 != 0.0 ? (e - e0) / e0 : 0.0);
      }
    } else if (op == "selfsim") {
      std::printf("t E_selfsim\n");
      for (const auto& p : self_similar_energy(traj, model, lambda, A, rule, t_plus)) print_row("%.6f %.12e", p.t, p.value);
    } else if (op == "select_times") {
      const auto sel = select_times(traj, count, rule, t_plus);
      std::printf("t criterion\n");
      for (std::size_t i = 0; i < sel.times.size(); ++i) print_row("%.6f %.12e", sel.times[i], sel.criterion[i]);
    } else if (op == "linf") {
      std::printf("t sup_out_cone\n");
      for (const auto& p : linf_outside_cone(traj, lambda)) print_row("%.6f %.12e", p.t, p.value);
    } else if (op == "lightcone") {
      if (!linear) {
        std::cerr << "error: lightcone needs a linear trajectory\n";
        code = 1;
        continue;
      }
      std::printf("t exterior total kin_fraction hl_fraction tainted\n");
      for (const auto& c : lightcone_concentration(traj, A))
        std::printf("%.6f %.12e %.12e %.6f %.6f %d\n", c.t, c.exterior, c.total, c.kin_fraction, c.hl_fraction,
                    c.tainted ? 1 : 0);
    } else if (op == "snorm") {
      const double ell = traj.frames.back().ell_inf;
      const double slope = linear ? traj.linear_slope : std::abs(metric.g_prime(ell));
      std::printf("S_norm %.12e\n", s_norm(traj, ell, slope, traj.start_time(), traj.end_time()));
    } else {
      std::cerr << "error: unknown op '" << op << "' (energy, selfsim, select_times, linf, lightcone, snorm)\n";
      code = 1;
    }
  }
  return code;
}

int cmd_resolve(const std::string& snapshot, const std::string& traj_dir, const std::string& metric_name,
                const std::string& g, const std::string& gp, double R, const std::string& stages,
                const std::string& out) {
  try {
    if (!out.empty()) fs::create_directories(out);
    auto emit = [&](const std::string& name, const std::string& text) {
      std::cout << "# " << name << "\n" << text;
      if (!out.empty()) write_text(fs::path(out) / name, text);
    };
    if (!snapshot.empty()) {
      const auto snap = read_snapshot(snapshot);
      const Metric metric = g.empty() ? Metric::by_name(metric_name) : Metric::custom(g, gp, {-10.0, 10.0});
      if (!snap.metric_id.empty() && snap.metric_id != metric.id())
        std::cerr << "warning: snapshot metric '" << snap.metric_id << "' differs from '" << metric.id() << "'\n";
      const double r = R > 0.0 ? R : 0.5 * snap.field.grid.r_max();
      const auto rep = extract_bubbles(snap.field, metric, r);
      emit("bubbles.txt", format_bubble_report(rep) + format_pythagorean(pythagorean_report(rep, metric)));
      if (!out.empty()) write_snapshot(fs::path(out) / "residual.snap", rep.residual, metric.id());
      return rep.errors.empty() ? 0 : 1;
    }
    const auto st = read_trajectory(traj_dir);
    const Metric metric = st.metric.build();
    const auto& traj = st.traj;
    auto list = split_list(stages);
    if (list.empty()) list = traj.blowup ? std::vector<std::string>{"regular_part"}
                                         : std::vector<std::string>{"scattering", "bubbles"};
    int code = 0;
    for (const auto& s : list) {
      if (s == "scattering") {
        const auto state = traj.flow == "linear" ? build_scattering_state_linear(traj)
                                                 : build_scattering_state(traj, metric);
        emit("scattering.txt", format_scattering(state));
      } else if (s == "bubbles") {
        const auto& fr = traj.frames.back();
        const auto rep = extract_bubbles(fr, metric, R > 0.0 ? R : 0.5 * fr.grid.r_max());
        emit("bubbles.txt", format_bubble_report(rep) + format_pythagorean(pythagorean_report(rep, metric)));
        if (!rep.errors.empty()) code = 1;
      } else if (s == "regular_part") {
        emit("regular_part.txt", format_regular_part(extract_regular_part(traj, metric)));
      } else {
        std::cerr << "error: unknown stage '" << s << "'\n";
        code = 1;
      }
    }
    return code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Equivariant wave maps into surfaces of revolution"};
  app.require_subcommand(1);

  std::vector<std::string> configs;
  std::string out;
  int jobs = 1;
  auto* sim = app.add_subcommand("simulate", "Run scenario configs");
  sim->add_option("--config", configs, "Scenario file (repeatable)")->required();
  sim->add_option("--out", out, "Output directory (overrides the config)");
  sim->add_option("--jobs", jobs, "Scenarios run concurrently")->check(CLI::PositiveNumber);

  std::string traj_dir, ops = "energy";
  double lambda = 0.5, A = 2.0;
  std::size_t count = 5;
  auto* ana = app.add_subcommand("analyze", "Diagnostics on a stored trajectory");
  ana->add_option("--traj", traj_dir, "Trajectory directory")->required();
  ana->add_option("--ops", ops, "energy,selfsim,select_times,linf,lightcone,snorm");
  ana->add_option("--lambda", lambda, "Self-similar inner fraction");
  ana->add_option("--A", A, "Light-cone offset");
  ana->add_option("--count", count, "Number of selected times");

  std::string snapshot, metric_name = "sphere", g, gp, stages, res_out;
  double R = 0.0;
  auto* res = app.add_subcommand("resolve", "Bubble, scattering and regular-part pipelines");
  auto* snap_opt = res->add_option("--snapshot", snapshot, "Snapshot file");
  auto* traj_opt = res->add_option("--traj", traj_dir, "Trajectory directory");
  snap_opt->excludes(traj_opt);
  res->add_option("--metric", metric_name, "Metric name for snapshots (sphere, yang_mills)");
  res->add_option("--g", g, "Custom g(x) expression for snapshots");
  res->add_option("--g-prime", gp, "Custom g'(x) expression");
  res->add_option("--R", R, "Outer radius of the extraction (default r_max / 2)");
  res->add_option("--stages", stages, "scattering,bubbles,regular_part (trajectories)");
  res->add_option("--out", res_out, "Write reports here");

  std::string filter;
  auto* self = app.add_subcommand("selftest", "Run the acceptance suites");
  self->add_option("--filter", filter, "Substring of a suite name");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << e.what() << "\n\n" << app.help();
    return 2;
  }

  if (*sim) return cmd_simulate(configs, out, jobs);
  if (*ana) return cmd_analyze(traj_dir, ops, lambda, A, count);
  if (*res) {
    if (snapshot.empty() && traj_dir.empty()) {
      std::cerr << "error: resolve needs --snapshot or --traj\n";
      return 2;
    }
    return cmd_resolve(snapshot, traj_dir, metric_name, g, gp, R, stages, res_out);
  }
  const auto results = run_suites(filter, std::cout);
  if (results.empty()) {
    std::cerr << "error: no suite matches '" << filter << "'\n";
    return 1;
  }
  const auto passed = std::count_if(results.begin(), results.end(), [](const auto& r) { return r.pass; });
  std::cout << passed << "/" << results.size() << " suites passed" << std::endl;
  return passed == static_cast<long>(results.size()) ? 0 : 1;
}
