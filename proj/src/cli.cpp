#include "bdf/cli.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>
#include <omp.h>

#include "bdf/config.hpp"
#include "bdf/error.hpp"
#include "bdf/eval.hpp"
#include "bdf/field.hpp"

namespace bdf {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

/// Writes through `fn` to `path`, or to `fallback` when the path is empty or "-".
void emit(const std::string& path, std::ostream& fallback, const std::function<void(std::ostream&)>& fn) {
  if (path.empty() || path == "-") {
    fn(fallback);
    return;
  }
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw DataError("cannot open '" + path + "' for writing");
  fn(file);
  if (!file) throw DataError("failed writing '" + path + "'");
}

Dataset generate_named(const std::string& name, std::size_t n, std::uint64_t seed) {
  if (name == "blobs") return generate_blobs(n, seed);
  if (name == "chunks") return generate_chunks(n, seed);
  if (name == "airways") return generate_airways(n, seed);
  throw InvalidArgument("unknown dataset generator '" + name + "' (expected blobs, chunks or airways)");
}

Dataset load_or_generate(const RunConfig& cfg) {
  if (!cfg.data.empty()) return load_trajectories(cfg.data);
  return generate_named(cfg.dataset, cfg.n, cfg.seed);
}

Points load_query_points(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::string line;
  std::size_t line_no = 0;
  bool header = false;
  std::vector<Vec3> pts;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    if (!header) {
      if (line.rfind("x,y,z", 0) != 0) throw DataError(path + ":" + std::to_string(line_no) + ": header must start with x,y,z");
      header = true;
      continue;
    }
    std::istringstream row(line);
    Vec3 p;
    char comma = 0;
    std::string cell;
    for (int d = 0; d < 3; ++d) {
      if (!std::getline(row, cell, ',')) throw DataError(path + ":" + std::to_string(line_no) + ": too few fields");
      try {
        std::size_t used = 0;
        p[d] = std::stod(cell, &used);
        if (used != cell.size() || !std::isfinite(p[d])) throw std::invalid_argument("bad");
      } catch (const std::exception&) {
        throw DataError(path + ":" + std::to_string(line_no) + ": field " + std::to_string(d + 1) + " is not a finite number");
      }
    }
    (void)comma;
    pts.push_back(p);
  }
  if (!header) throw DataError(path + ": missing header");
  if (pts.empty()) throw DataError(path + ": no query points");
  Points out(static_cast<Index>(pts.size()), 3);
  for (std::size_t i = 0; i < pts.size(); ++i) out.row(static_cast<Index>(i)) = pts[i].transpose();
  return out;
}

/// Training-time preparation shared by train, compare-gp and bench: fits the
/// normalizer on `data` and appends QMC free-space samples when configured.
struct Prepared {
  Dataset data;
  FieldConfig field;
};

Prepared prepare(const RunConfig& cfg, const Dataset& raw) {
  if (raw.empty()) throw DataError("dataset is empty");
  Prepared p{raw, cfg.field_config()};
  if (cfg.normalize) p.field.normalizer = normalize(raw, cfg.standardize_velocity).second;
  if (cfg.qmc_count > 0) {
    const auto& tf = p.field.normalizer;
    Dataset model(tf.positions_to_model(raw.positions), Points::Zero(raw.size(), 3));
    model.tags = raw.tags;
    const Dataset aug = qmc_augment(model, cfg.bounds, cfg.qmc_count, cfg.effective_qmc_radius(), cfg.qmc_sequence);
    std::vector<Index> rows;
    for (Index r = model.size(); r < aug.size(); ++r) rows.push_back(r);
    Dataset synthetic = aug.subset(rows);
    synthetic.positions = tf.positions_to_world(synthetic.positions);
    if (raw.timestamps) synthetic.timestamps = VectorXd::Constant(synthetic.size(), raw.timestamps->minCoeff());
    p.data.append(synthetic);
  }
  return p;
}

std::string join_lines(const std::vector<std::string>& lines) {
  std::string s;
  for (const auto& l : lines) s += l + "\n";
  return s;
}

std::map<std::string, std::string> echo_map(const std::vector<std::string>& lines) {
  std::map<std::string, std::string> m;
  for (const auto& l : lines) {
    const auto eq = l.find('=');
    if (eq != std::string::npos) m[l.substr(0, eq)] = l.substr(eq + 1);
  }
  return m;
}

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  std::string l;
  while (std::getline(in, l)) {
    if (!l.empty()) lines.push_back(l);
  }
  return lines;
}

struct CommonOptions {
  std::string config_path;
  std::vector<std::string> overrides;
};

void add_config_options(CLI::App* cmd, CommonOptions& opts) {
  cmd->add_option("--config", opts.config_path, "key = value config file");
  cmd->add_option("--set", opts.overrides, "override one config key (key=value), repeatable");
}

RunConfig resolve_config(const CommonOptions& opts) {
  RunConfig cfg;
  if (!opts.config_path.empty()) cfg.load_file(opts.config_path);
  for (const auto& kv : opts.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw InvalidArgument("--set expects key=value, got '" + kv + "'");
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  cfg.validate();
  if (cfg.threads > 0) omp_set_num_threads(cfg.threads);
  return cfg;
}

std::vector<std::size_t> parse_sizes(const std::string& text) {
  std::vector<std::size_t> sizes;
  std::istringstream in(text);
  std::string part;
  while (std::getline(in, part, ',')) {
    try {
      std::size_t used = 0;
      const unsigned long long v = std::stoull(part, &used);
      if (used != part.size() || v == 0) throw std::invalid_argument("bad");
      sizes.push_back(static_cast<std::size_t>(v));
    } catch (const std::exception&) {
      throw InvalidArgument("--sizes expects positive integers separated by commas, got '" + text + "'");
    }
  }
  if (sizes.empty()) throw InvalidArgument("--sizes is empty");
  if (!std::is_sorted(sizes.begin(), sizes.end())) throw InvalidArgument("--sizes must be increasing");
  return sizes;
}

int exit_code_for(const Error& e) {
  if (dynamic_cast<const NumericalFailure*>(&e)) return kExitNumeric;
  if (dynamic_cast<const InvalidArgument*>(&e)) return kExitUsage;
  return kExitData;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Bayesian velocity fields: train, update and query 3D velocity maps with uncertainty", "bdf"};
  app.require_subcommand(1);

  std::function<void()> action;

  // generate
  std::string gen_name = "blobs", gen_out;
  std::size_t gen_n = 5000;
  std::uint64_t gen_seed = 0;
  auto* generate = app.add_subcommand("generate", "write a synthetic dataset (blobs, chunks, airways) as CSV");
  generate->add_option("--dataset", gen_name, "generator name")->check(CLI::IsMember({"blobs", "chunks", "airways"}));
  generate->add_option("--n", gen_n, "number of points");
  generate->add_option("--seed", gen_seed, "random seed");
  generate->add_option("--out", gen_out, "output CSV (default stdout)");
  generate->callback([&] {
    action = [&] {
      const Dataset d = generate_named(gen_name, gen_n, gen_seed);
      emit(gen_out, out, [&](std::ostream& os) {
        write_dataset_csv(os, d, {"generator=" + gen_name, "n=" + std::to_string(gen_n), "seed=" + std::to_string(gen_seed)});
      });
    };
  });

  // train
  CommonOptions train_opts;
  std::string train_data, train_out;
  auto* train = app.add_subcommand("train", "train a velocity field from CSV or a generator");
  add_config_options(train, train_opts);
  train->add_option("--data", train_data, "training CSV (overrides config 'data')");
  train->add_option("--out", train_out, "output field file")->required();
  train->callback([&] {
    action = [&] {
      RunConfig cfg = resolve_config(train_opts);
      if (!train_data.empty()) cfg.data = train_data;
      const Dataset raw = load_or_generate(cfg);
      if (raw.empty()) {
        throw DataError("dataset '" + (cfg.data.empty() ? cfg.dataset : cfg.data) + "' is empty; nothing to train on");
      }
      const Prepared p = prepare(cfg, raw);
      const VelocityField field = train_field(p.data, p.field);
      save_field(field, train_out, join_lines(cfg.echo()));
    };
  });

  // update
  std::string upd_field, upd_data, upd_out;
  auto* update = app.add_subcommand("update", "fold a new CSV batch into an existing field");
  update->add_option("--field", upd_field, "input field file")->required();
  update->add_option("--data", upd_data, "batch CSV")->required();
  update->add_option("--out", upd_out, "output field file")->required();
  update->callback([&] {
    action = [&] {
      const VelocityField field = load_field(upd_field);
      const Dataset batch = load_trajectories(upd_data);
      std::string echo = load_field_config_echo(upd_field);
      echo += "update=" + upd_data + "\n";
      save_field(update_field(field, batch), upd_out, echo);
    };
  });

  // query
  std::string q_field, q_points, q_grid, q_out;
  auto* query = app.add_subcommand("query", "predict velocity mean and variance at points or on a grid");
  query->add_option("--field", q_field, "field file")->required();
  auto* q_points_opt = query->add_option("--points", q_points, "CSV with header starting x,y,z");
  auto* q_grid_opt = query->add_option("--grid", q_grid, "lo:step:hi (all axes) or three comma-separated specs");
  q_points_opt->excludes(q_grid_opt);
  query->add_option("--out", q_out, "estimates CSV (default stdout)");
  query->callback([&] {
    action = [&] {
      if (q_points.empty() && q_grid.empty()) throw InvalidArgument("query needs --points or --grid");
      const VelocityField field = load_field(q_field);
      const Points pts = q_grid.empty() ? load_query_points(q_points) : parse_grid_spec(q_grid);
      QueryStats stats;
      const auto est = query_field(field, pts, &stats);
      std::vector<std::string> comments = split_lines(load_field_config_echo(q_field));
      comments.push_back("query=" + (q_grid.empty() ? q_points : "grid:" + q_grid));
      comments.push_back("outside_grid=" + std::to_string(stats.outside_grid));
      if (stats.outside_grid > 0) {
        err << "bdf: warning: " << stats.outside_grid << " query point(s) outside the trained grid\n";
      }
      emit(q_out, out, [&](std::ostream& os) { write_estimates_csv(os, est, comments); });
    };
  });

  // filter
  std::string f_in, f_out;
  double f_sigma = 30.0;
  auto* filter = app.add_subcommand("filter", "keep estimates whose largest std-dev is within a threshold");
  filter->add_option("--estimates", f_in, "estimates CSV")->required();
  filter->add_option("--sigma", f_sigma, "sigma threshold")->check(CLI::PositiveNumber);
  filter->add_option("--out", f_out, "output CSV (default stdout)");
  filter->callback([&] {
    action = [&] {
      std::ifstream in(f_in);
      if (!in) throw DataError("cannot open '" + f_in + "'");
      const auto est = parse_estimates_csv(in, f_in);
      const auto kept = filter_by_confidence(est, f_sigma);
      emit(f_out, out, [&](std::ostream& os) {
        write_estimates_csv(os, kept, {"filter_source=" + f_in, "sigma_threshold=" + format_double(f_sigma)});
      });
    };
  });

  // augment
  CommonOptions aug_opts;
  std::string a_data, a_out, a_bounds, a_sequence = "sobol";
  std::size_t a_count = 1000;
  double a_radius = 0.0;
  auto* augment = app.add_subcommand("augment", "add zero-velocity QMC samples in free space");
  add_config_options(augment, aug_opts);
  augment->add_option("--data", a_data, "input CSV")->required();
  augment->add_option("--count", a_count, "number of QMC samples");
  augment->add_option("--radius", a_radius, "removal radius in data units (default: config qmc radius)");
  augment->add_option("--sequence", a_sequence, "sobol or halton")->check(CLI::IsMember({"sobol", "halton"}));
  augment->add_option("--bounds", a_bounds, "lo:hi[,lo:hi,lo:hi] sampling box (default: data bounding box)");
  augment->add_option("--out", a_out, "output CSV (default stdout)");
  augment->callback([&] {
    action = [&] {
      RunConfig cfg = resolve_config(aug_opts);
      const Dataset data = load_trajectories(a_data);
      std::array<AxisRange, 3> bounds;
      if (!a_bounds.empty()) {
        cfg.set("bounds", a_bounds);
        bounds = cfg.bounds;
      } else {
        if (data.empty()) throw DataError("augment: empty dataset and no --bounds");
        for (int d = 0; d < 3; ++d) {
          bounds[static_cast<std::size_t>(d)] = {data.positions.col(d).minCoeff(), data.positions.col(d).maxCoeff()};
        }
      }
      const double radius = a_radius > 0.0 ? a_radius : cfg.effective_qmc_radius();
      const Dataset aug = qmc_augment(data, bounds, a_count, radius, parse_qmc_sequence(a_sequence));
      emit(a_out, out, [&](std::ostream& os) {
        write_dataset_csv(os, aug,
                          {"augment_source=" + a_data, "qmc_sequence=" + a_sequence, "qmc_count=" + std::to_string(a_count),
                           "removal_radius=" + format_double(radius),
                           "synthetic_rows=" + std::to_string(aug.synthetic_count()) + " (appended after row " +
                               std::to_string(data.size()) + ")"});
      });
    };
  });

  // evaluate
  std::string e_field, e_test, e_out;
  auto* evaluate = app.add_subcommand("evaluate", "score a field on a labelled test CSV (JSON report)");
  evaluate->add_option("--field", e_field, "field file")->required();
  evaluate->add_option("--test", e_test, "test CSV")->required();
  evaluate->add_option("--out", e_out, "report JSON (default stdout)");
  evaluate->callback([&] {
    action = [&] {
      const VelocityField field = load_field(e_field);
      const Dataset test = load_trajectories(e_test);
      EvalReport report = evaluate_field(field, test);
      report.config = echo_map(split_lines(load_field_config_echo(e_field)));
      report.config["test"] = e_test;
      emit(e_out, out, [&](std::ostream& os) { os << report.to_json() << '\n'; });
    };
  });

  // bench
  CommonOptions b_opts;
  std::string b_sizes = "1000,10000", b_out;
  std::size_t b_repeats = 3;
  auto* bench = app.add_subcommand("bench", "train-time scaling table over dataset sizes (CSV)");
  add_config_options(bench, b_opts);
  bench->add_option("--sizes", b_sizes, "increasing comma-separated training sizes");
  bench->add_option("--repeats", b_repeats, "timed repeats per size (median reported)")->check(CLI::PositiveNumber);
  bench->add_option("--out", b_out, "output CSV (default stdout)");
  bench->callback([&] {
    action = [&] {
      const RunConfig cfg = resolve_config(b_opts);
      const auto sizes = parse_sizes(b_sizes);
      const std::size_t largest = sizes.back();
      Dataset all = cfg.data.empty() ? generate_named(cfg.dataset, largest + cfg.bench_test_n, cfg.seed)
                                      : load_trajectories(cfg.data);
      if (static_cast<std::size_t>(all.size()) < largest + cfg.bench_test_n) {
        throw DataError("bench needs " + std::to_string(largest + cfg.bench_test_n) + " rows, data has " +
                        std::to_string(all.size()));
      }
      std::vector<Index> pool_rows, test_rows;
      for (Index r = 0; r < all.size(); ++r) {
        (static_cast<std::size_t>(r) < largest ? pool_rows : test_rows).push_back(r);
      }
      test_rows.resize(cfg.bench_test_n);
      FieldConfig fc = cfg.field_config();
      if (cfg.normalize) fc.normalizer = normalize(all, cfg.standardize_velocity).second;
      const auto rows = scaling_benchmark(all.subset(pool_rows), all.subset(test_rows), sizes, fc, {b_repeats, true});
      auto comments = cfg.echo();
      comments.push_back("repeats=" + std::to_string(b_repeats));
      comments.push_back("threads=" + std::to_string(omp_get_max_threads()));
      emit(b_out, out, [&](std::ostream& os) { write_scaling_csv(os, rows, comments); });
    };
  });

  // compare-gp
  CommonOptions g_opts;
  std::string g_data, g_out;
  auto* compare = app.add_subcommand("compare-gp", "BDF versus the exact full-GP oracle on one split (JSON)");
  add_config_options(compare, g_opts);
  compare->add_option("--data", g_data, "CSV (default: config generator)");
  compare->add_option("--out", g_out, "report JSON (default stdout)");
  compare->callback([&] {
    action = [&] {
      RunConfig cfg = resolve_config(g_opts);
      if (!g_data.empty()) cfg.data = g_data;
      const Dataset raw = load_or_generate(cfg);
      if (raw.size() < 4) throw DataError("compare-gp needs at least 4 rows");
      const auto [train_raw, test] = split(raw, cfg.test_fraction, cfg.seed);
      const Prepared p = prepare(cfg, train_raw);

      auto start = Clock::now();
      const VelocityField field = train_field(p.data, p.field);
      const double bdf_train = seconds_since(start);
      EvalReport bdf_report = evaluate_field(field, test);
      bdf_report.train_time_s = bdf_train;

      const auto& tf = p.field.normalizer;
      start = Clock::now();
      const FullGp gp = FullGp::fit(tf.positions_to_model(p.data.positions), tf.velocities_to_model(p.data.velocities),
                                    KernelSpec{cfg.gamma}, 1.0 / cfg.beta, cfg.gp_cap);
      const double gp_train = seconds_since(start);
      start = Clock::now();
      const GpPrediction pred = gp.predict(tf.positions_to_model(test.positions));
      const double gp_query = seconds_since(start);
      Points mean_model = pred.means;
      const Points mean_world = tf.velocities_to_world(mean_model);
      MatrixXd var_world(test.size(), 3);
      for (int d = 0; d < 3; ++d) var_world.col(d) = pred.variances / (tf.velocity_scale[d] * tf.velocity_scale[d]);
      const MatrixXd truth = test.velocities;
      const double gp_rmse = rmse(mean_world, truth);
      const auto& ls = field.label_stats();
      const double gp_msll = msll(mean_world, var_world, truth, ls.mean(), ls.variance());

      nlohmann::ordered_json j;
      j["bdf"] = {{"rmse", bdf_report.rmse},
                  {"msll", bdf_report.msll},
                  {"train_time_s", bdf_report.train_time_s},
                  {"query_time_s", bdf_report.query_time_s},
                  {"M", bdf_report.basis_size}};
      j["fgp"] = {{"rmse", gp_rmse}, {"msll", gp_msll}, {"train_time_s", gp_train}, {"query_time_s", gp_query}};
      j["rmse_ratio_bdf_over_fgp"] = bdf_report.rmse / gp_rmse;
      j["n_train"] = p.data.size();
      j["n_test"] = test.size();
      j["threads"] = omp_get_max_threads();
      j["not_implemented"] = {"SGP", "BGP"};
      j["config"] = echo_map(cfg.echo());
      emit(g_out, out, [&](std::ostream& os) { os << j.dump(2) << '\n'; });
    };
  });

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::Success& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  try {
    if (action) action();
    return kExitOk;
  } catch (const Error& e) {
    err << "bdf: error[" << e.code() << "]: " << e.what() << '\n';
    return exit_code_for(e);
  } catch (const std::exception& e) {
    err << "bdf: error[E_INTERNAL]: " << e.what() << '\n';
    return kExitData;
  }
}

}  // namespace bdf
