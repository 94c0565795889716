#include "paracon/cli/commands.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <functional>
#include <ostream>
#include <sstream>
#include <thread>

namespace paracon::cli {

namespace fs = std::filesystem;

namespace {

void parallel_for(std::size_t count, std::size_t jobs, const std::function<void(std::size_t)>& body) {
  jobs = std::max<std::size_t>(1, std::min(jobs, count));
  if (jobs == 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> workers;
  for (std::size_t w = 0; w < jobs; ++w) {
    workers.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) body(i);
    });
  }
  for (auto& t : workers) t.join();
}

RunConfig prepare(const CommandOptions& options) {
  if (options.jobs == 0) throw ConfigError("--jobs must be >= 1");
  RunConfig config = load_config(options.config);
  if (options.seed) override_seed(config, *options.seed);
  if (options.out) config.output.directory = *options.out;
  return config;
}

std::optional<Point> strong_z_star(const ProblemInstance& inst) {
  return inst.z_star_strong ? inst.z_star : std::nullopt;
}

/// M = max(||x0 - theta||, ||z* - theta||).
double envelope_radius(const ProblemInstance& inst, const Point& x0) {
  const Point& theta = inst.op.set().theta();
  double m = (x0 - theta).norm();
  if (inst.z_star) m = std::max(m, (*inst.z_star - theta).norm());
  return m;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

void write_certificate(const OutputConfig& output, const fs::path& dir, const std::string& run_id,
                       const Certificate& cert) {
  if (output.text) write_text(dir / (run_id + ".certificate.txt"), format_certificate(cert));
  if (output.json) write_text(dir / (run_id + ".certificate.json"), certificate_to_json(cert).dump(2) + "\n");
}

void write_trace(const OutputConfig& output, const fs::path& dir, const std::string& run_id,
                 const std::vector<TraceRecord>& trace) {
  if (!output.csv) return;
  std::ofstream out(dir / (run_id + ".trace.csv"), std::ios::binary);
  if (!out) throw std::runtime_error("cannot write trace for " + run_id);
  write_trace_csv(out, trace);
}

std::string summary_line(const std::string& run_id, const Certificate& cert) {
  std::ostringstream os;
  os << run_id << ": " << to_string(cert.termination) << " steps=" << cert.steps
     << " final_residual=" << (cert.final_residual ? format_double(*cert.final_residual) : "-");
  if (cert.stabilization && cert.stabilization->stabilized) os << " t0=" << cert.stabilization->t0;
  os << " large_steps=";
  for (std::size_t i = 0; i < cert.levels.size(); ++i)
    os << (i ? "," : "") << format_double(cert.levels[i].epsilon) << ':' << cert.levels[i].large_steps;
  return os.str();
}

int exit_for(Termination termination) {
  switch (termination) {
    case Termination::Converged: return kExitOk;
    case Termination::MaxIter: return kExitMaxIter;
    case Termination::Error: return kExitUsage;
  }
  return kExitUsage;
}

int combine(const std::vector<int>& codes) {
  if (std::count(codes.begin(), codes.end(), kExitUsage)) return kExitUsage;
  if (std::count(codes.begin(), codes.end(), kExitAssumption)) return kExitAssumption;
  if (std::count(codes.begin(), codes.end(), kExitMaxIter)) return kExitMaxIter;
  return kExitOk;
}

template <class F>
int guarded(std::ostream& err, F&& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
  }
  return kExitUsage;
}

}  // namespace

Certificate make_certificate(const RunConfig& config, const ProblemInstance& instance, const std::string& run_id,
                             const IterationRun& run) {
  const auto z_star = strong_z_star(instance);
  CertifyOptions options;
  options.run_id = run_id;
  options.tol_fix = config.analysis.tol_fix;
  options.stabilization = config.analysis.stabilization;
  if (z_star && config.analysis.delta_samples > 0) {
    const double m = envelope_radius(instance, run.trace.front().x);
    DeltaOptions delta_options;
    delta_options.sampling = config.analysis.sampling;
    delta_options.tol_fix = config.analysis.tol_fix;
    if (m > 0.0) {
      for (double eps : config.analysis.epsilons)
        options.delta_estimates.push_back(estimate_delta(instance.op.family(), *z_star, eps, 3.0 * m,
                                                         instance.op.set(), config.analysis.delta_samples,
                                                         config.analysis.seed, delta_options));
    }
  }
  return certify_run(run, instance.op, z_star, config.analysis.epsilons, options);
}

int cmd_run(const CommandOptions& options, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const RunConfig config = prepare(options);
    const auto instances = build_instances(config);
    const auto tasks = plan_runs(config, instances);
    const fs::path dir = config.output.directory;
    fs::create_directories(dir);

    std::vector<int> codes(tasks.size(), kExitUsage);
    std::vector<std::string> lines(tasks.size());
    parallel_for(tasks.size(), options.jobs, [&](std::size_t i) {
      const auto& task = tasks[i];
      const auto& inst = instances[task.instance];
      try {
        const IterationRun run = run_iteration(inst.op, task.x0, config.iteration, inst.z_star);
        write_trace(config.output, dir, task.run_id, run.trace);
        const Certificate cert = make_certificate(config, inst, task.run_id, run);
        write_certificate(config.output, dir, task.run_id, cert);
        lines[i] = summary_line(task.run_id, cert);
        codes[i] = exit_for(run.termination);
      } catch (const IterationError& e) {
        write_trace(config.output, dir, task.run_id, e.partial().trace);
        lines[i] = task.run_id + ": error " + e.what();
      } catch (const std::exception& e) {
        lines[i] = task.run_id + ": error " + e.what();
      }
    });
    for (std::size_t i = 0; i < tasks.size(); ++i) (codes[i] == kExitUsage ? err : out) << lines[i] << '\n';
    return combine(codes);
  });
}

int cmd_validate(const CommandOptions& options, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const RunConfig config = prepare(options);
    const auto instances = build_instances(config);
    const auto tasks = plan_runs(config, instances);
    const auto& a = config.analysis;
    std::vector<int> codes;

    for (std::size_t idx = 0; idx < instances.size(); ++idx) {
      const auto& inst = instances[idx];
      double m = 0.0;
      for (const auto& task : tasks)
        if (task.instance == idx) m = std::max(m, envelope_radius(inst, task.x0));
      const double radius = a.radius.value_or(std::max(3.0 * m, 1.0));

      std::vector<std::size_t> members(inst.op.size());
      for (std::size_t j = 0; j < members.size(); ++j) members[j] = j;
      if (members.size() > a.a2_max_operators) {
        Rng rng(a.seed);
        std::shuffle(members.begin(), members.end(), rng);
        members.resize(a.a2_max_operators);
        std::sort(members.begin(), members.end());
      }

      A2Options a2;
      a2.tol_fix = a.tol_fix;
      if (auto z = strong_z_star(inst)) a2.known_fixed_points = {*z};
      std::vector<std::string> lines(members.size());
      std::vector<int> member_codes(members.size(), kExitOk);
      parallel_for(members.size(), options.jobs, [&](std::size_t k) {
        const std::size_t j = members[k];
        const Paracontraction op_j = inst.op.family().at(j);
        std::ostringstream os;
        os << "A2 " << inst.name << " [" << inst.op.family().label(j) << "] " << op_j.describe() << ": ";
        try {
          A2Options local = a2;
          local.operator_id = inst.op.family().label(j);
          const auto report = validate_paracontraction(op_j, inst.op.set(), radius, a.a2_samples, a.seed + j, local);
          os << (report.passed() ? "pass" : "FAIL") << " samples=" << report.samples_tested
             << " fixed_points=" << report.fixed_points_used << " violations=" << report.violations.size();
          if (!report.passed()) {
            const auto& v = report.violations.front();
            os << "\n  " << (v.strictness ? "strict" : "weak") << " violation at x=" << format_point(v.x)
               << " z=" << format_point(v.z) << " dist(z,Tx)=" << format_double(v.dist_image)
               << " dist(z,x)=" << format_double(v.dist_point);
            member_codes[k] = kExitAssumption;
          }
        } catch (const NoFixedPointError& e) {
          os << "no fixed point found (" << e.what() << ")";
          member_codes[k] = kExitUsage;
        }
        lines[k] = os.str();
      });
      for (const auto& line : lines) out << line << '\n';
      codes.insert(codes.end(), member_codes.begin(), member_codes.end());

      Rng rng(a.seed);
      std::size_t failures = 0;
      std::optional<Point> first_failure;
      for (std::size_t p = 0; p < a.a3_points; ++p) {
        const Point x = sample_in_set_ball(inst.op.set(), inst.op.set().theta(), radius, rng);
        const auto report = check_A3(inst.op, x, a.a3_probes, a.a3_radii, a.seed + 1 + p);
        if (!report.passed) {
          ++failures;
          if (!first_failure) first_failure = x;
        }
      }
      out << "A3 " << inst.name << " phi=" << to_string(inst.op.selection().kind) << ": "
          << (failures ? "FAIL" : "pass") << " points=" << a.a3_points << " failures=" << failures << '\n';
      if (first_failure) {
        out << "  no working radius at x=" << format_point(*first_failure) << '\n';
        codes.push_back(kExitAssumption);
      }
    }
    return combine(codes);
  });
}

int cmd_estimate_delta(const CommandOptions& options, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const RunConfig config = prepare(options);
    const auto instances = build_instances(config);
    const auto tasks = plan_runs(config, instances);
    const auto& a = config.analysis;
    const std::vector<double> epsilons = options.epsilon ? std::vector<double>{*options.epsilon} : a.epsilons;
    if (options.epsilon && !(*options.epsilon > 0.0)) throw ConfigError("--epsilon must be > 0");
    if (options.radius && !(*options.radius > 0.0)) throw ConfigError("--M must be > 0");

    for (std::size_t idx = 0; idx < instances.size(); ++idx) {
      const auto& inst = instances[idx];
      const auto z_star = strong_z_star(inst);
      if (!z_star) throw ConfigError("/problem: estimate-delta needs a z_star fixed by every operator");
      double m = 0.0;
      for (const auto& task : tasks)
        if (task.instance == idx) m = std::max(m, envelope_radius(inst, task.x0));
      const double radius = options.radius.value_or(a.radius.value_or(m));
      if (!(radius > 0.0)) throw ConfigError("/analysis/radius: M must be > 0");

      DeltaOptions delta_options;
      delta_options.sampling = a.sampling;
      delta_options.tol_fix = a.tol_fix;
      for (double eps : epsilons) {
        const auto est =
            estimate_delta(inst.op.family(), *z_star, eps, radius, inst.op.set(), a.delta_samples, a.seed, delta_options);
        out << "instance: " << inst.name << '\n';
        out << "epsilon: " << format_double(eps) << '\n';
        out << "M: " << format_double(radius) << '\n';
        out << "sampling: " << (a.sampling == DeltaSampling::Grid ? "grid" : "random") << '\n';
        out << "samples: " << est.n_samples << '\n';
        out << "active_samples: " << est.active_samples << '\n';
        out << "seed: " << est.seed << '\n';
        if (est.empty_region) {
          out << "delta_hat: absent\n";
          out << "notice: empty active region (no sampled step moves more than epsilon)\n";
        } else {
          out << "delta_hat: " << format_double(est.delta_hat) << '\n';
          out << "argmin_operator: " << inst.op.family().label(*est.argmin_index) << '\n';
          out << "argmin_x: " << format_point(*est.argmin_x) << '\n';
          if (est.delta_hat > 0.0) {
            out << "Q_plain: " << q_bound(radius, est.delta_hat, IterationMode::Plain) << '\n';
            out << "Q_km: " << q_bound(radius, est.delta_hat, IterationMode::KrasnoselskiMann, config.iteration.kappa)
                << '\n';
            out << "kappa: " << format_double(config.iteration.kappa) << '\n';
          } else {
            out << "notice: nonpositive delta_hat, no Q bound\n";
          }
        }
        out << '\n';
      }
    }
    return kExitOk;
  });
}

int cmd_report(const CommandOptions& options, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    RunConfig config = load_config(options.config);
    if (options.seed) override_seed(config, *options.seed);
    const auto instances = build_instances(config);
    const auto tasks = plan_runs(config, instances);
    const fs::path source = options.trace.value_or(config.output.directory);

    std::vector<std::pair<const RunTask*, fs::path>> selected;
    if (fs::is_directory(source)) {
      for (const auto& task : tasks) selected.emplace_back(&task, source / (task.run_id + ".trace.csv"));
    } else {
      const std::string name = source.filename().string();
      const std::string suffix = ".trace.csv";
      if (name.size() <= suffix.size() || name.compare(name.size() - suffix.size(), suffix.size(), suffix) != 0)
        throw ConfigError("--trace: expected a <run_id>.trace.csv file or a directory");
      const std::string run_id = name.substr(0, name.size() - suffix.size());
      const auto it = std::find_if(tasks.begin(), tasks.end(), [&](const RunTask& t) { return t.run_id == run_id; });
      if (it == tasks.end()) throw ConfigError("--trace: run '" + run_id + "' is not part of this config");
      selected.emplace_back(&*it, source);
    }

    if (options.out) fs::create_directories(*options.out);
    for (const auto& [task, path] : selected) {
      std::ifstream in(path, std::ios::binary);
      if (!in) throw std::runtime_error("cannot read " + path.string());
      IterationRun run;
      run.config = config.iteration;
      run.trace = read_trace_csv(in);
      if (run.trace.empty()) throw std::runtime_error(path.string() + ": empty trace");
      run.x0 = run.trace.front().x;
      run.termination = classify_trace(run.trace, run.config);
      const Certificate cert = make_certificate(config, instances[task->instance], task->run_id, run);
      out << format_certificate(cert);
      if (options.out) write_certificate(config.output, *options.out, task->run_id, cert);
    }
    return kExitOk;
  });
}

}  // namespace paracon::cli
