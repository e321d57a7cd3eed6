#include "xsect/app.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "xsect/analytics.hpp"
#include "xsect/backtest.hpp"
#include "xsect/csv.hpp"
#include "xsect/error.hpp"
#include "xsect/factors.hpp"
#include "xsect/log.hpp"
#include "xsect/synthgen.hpp"

namespace xsect {
namespace {

using nlohmann::json;

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void write_json(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

template <typename T>
T get(const json& j, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config field '") + key + "': " + e.what());
  }
}

json synth_to_json(const SynthSpec& s) {
  return json{{"n_stocks", s.n_stocks},
              {"n_days", s.n_days},
              {"seed", s.seed},
              {"daily_vol", s.daily_vol},
              {"signal_strength", s.signal_strength},
              {"signal_factor", s.signal_factor},
              {"fundamental_cadence", s.fundamental_cadence},
              {"start", s.start}};
}

SynthSpec synth_from_json(const json& j) {
  SynthSpec s;
  for (const auto& [key, value] : j.items()) {
    if (key == "n_stocks") s.n_stocks = get<std::size_t>(j, "n_stocks");
    else if (key == "n_days") s.n_days = get<std::size_t>(j, "n_days");
    else if (key == "seed") s.seed = get<std::uint64_t>(j, "seed");
    else if (key == "daily_vol") s.daily_vol = get<double>(j, "daily_vol");
    else if (key == "signal_strength") s.signal_strength = get<double>(j, "signal_strength");
    else if (key == "signal_factor") s.signal_factor = get<int>(j, "signal_factor");
    else if (key == "fundamental_cadence") s.fundamental_cadence = get<int>(j, "fundamental_cadence");
    else if (key == "start") s.start = get<std::string>(j, "start");
    else throw ConfigError("unknown synth config field '" + key + "'");
  }
  return s;
}

MarketPanel load_data(const std::filesystem::path& dir, std::size_t lag) {
  if (!std::filesystem::is_directory(dir)) throw ConfigError("data directory not found: " + dir.string());
  return load_panel(PanelPaths::in_directory(dir), LoadOptions{lag});
}

}  // namespace

RunConfig default_run_config() {
  RunConfig c;
  for (const auto& name : preset_names()) c.models.push_back(preset(name, c.seed));
  return c;
}

json to_json(const RunConfig& c) {
  json models = json::array();
  for (const auto& m : c.models) models.push_back(to_json(m));
  return json{{"data", c.data.string()},
              {"fundamentals_lag_days", c.fundamentals_lag_days},
              {"start", c.start ? json(*c.start) : json(nullptr)},
              {"end", c.end ? json(*c.end) : json(nullptr)},
              {"window", c.window},
              {"seed", c.seed},
              {"models", models},
              {"out", c.out.string()},
              {"threads", c.threads},
              {"max_missing", c.max_missing},
              {"include_ramp_in", c.include_ramp_in},
              {"quintile_override", c.quintile_override}};
}

RunConfig run_config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("run config must be a JSON object");
  RunConfig c = default_run_config();
  auto optional_date = [&](const char* key) -> std::optional<std::string> {
    if (j.at(key).is_null()) return std::nullopt;
    return get<std::string>(j, key);
  };
  for (const auto& [key, value] : j.items()) {
    if (key == "data") c.data = get<std::string>(j, "data");
    else if (key == "fundamentals_lag_days") c.fundamentals_lag_days = get<std::size_t>(j, "fundamentals_lag_days");
    else if (key == "start") c.start = optional_date("start");
    else if (key == "end") c.end = optional_date("end");
    else if (key == "window") c.window = get<std::size_t>(j, "window");
    else if (key == "seed") c.seed = get<std::uint64_t>(j, "seed");
    else if (key == "out") c.out = get<std::string>(j, "out");
    else if (key == "threads") c.threads = get<int>(j, "threads");
    else if (key == "max_missing") c.max_missing = get<std::size_t>(j, "max_missing");
    else if (key == "include_ramp_in") c.include_ramp_in = get<bool>(j, "include_ramp_in");
    else if (key == "quintile_override") c.quintile_override = get<std::size_t>(j, "quintile_override");
    else if (key != "models") throw ConfigError("unknown config field '" + key + "'");
  }
  // Models last: bare preset names pick up the run seed.
  if (j.contains("models")) {
    const json& m = j.at("models");
    if (!m.is_array() || m.empty()) throw ConfigError("config field 'models' must be a non-empty array");
    c.models.clear();
    for (const auto& e : m) {
      if (e.is_string()) c.models.push_back(preset(e.get<std::string>(), c.seed));
      else c.models.push_back(model_spec_from_json(e));
    }
  } else {
    for (auto& m : c.models) m.seed = c.seed;
  }
  if (c.window == 0) throw ConfigError("window must be positive");
  if (c.threads < 1) throw ConfigError("threads must be at least 1");
  if (c.max_missing > static_cast<std::size_t>(kNumFactors)) throw ConfigError("max_missing must be at most 33");
  for (const auto* d : {&c.start, &c.end})
    if (*d && !is_iso_date(**d)) throw ConfigError("not an ISO date: '" + **d + "'");
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("config file not found: " + path.string());
  return run_config_from_json(read_json(path));
}

std::vector<ModelSpec> parse_model_list(const std::string& list, std::uint64_t seed) {
  std::vector<ModelSpec> out;
  for (const auto& name : csv::split(list, ',')) {
    if (name.empty()) continue;
    out.push_back(preset(name, seed));
  }
  if (out.empty()) throw ConfigError("empty model list");
  return out;
}

void run_backtest_command(const RunConfig& config) {
  MarketPanel panel = load_data(config.data, config.fundamentals_lag_days);
  const Span span = resolve_span(panel, config.start, config.end, config.window);
  {
    std::vector<std::string> names;
    for (const auto& m : config.models) {
      if (std::find(names.begin(), names.end(), m.name) != names.end())
        throw ConfigError("duplicate model name '" + m.name + "'");
      names.push_back(m.name);
    }
  }

  std::filesystem::create_directories(config.out);
  RunConfig effective = config;
  if (!span.empty()) {
    effective.start = panel.calendar.date(span.first);
    effective.end = panel.calendar.date(span.last);
  }
  effective.data = std::filesystem::absolute(config.data);
  write_json(config.out / "config.json", to_json(effective));

  log(LogLevel::info, "computing factors for " + std::to_string(panel.n_stocks()) + " stocks x " +
                          std::to_string(panel.n_days()) + " days");
  const FeatureStore store(panel, FeatureOptions{static_cast<int>(config.max_missing)}, config.threads);
  BacktestOptions opts;
  opts.window = config.window;
  opts.threads = config.threads;
  opts.quintile_override = config.quintile_override;

  std::vector<MetricsReport> rows;
  for (const auto& spec : config.models) {
    log(LogLevel::info, "backtesting " + spec.name);
    const BacktestResult r = run_backtest(store, spec, span, opts);
    const auto dir = config.out / spec.name;
    std::filesystem::create_directories(dir);
    write_returns_csv(dir / "returns.csv", r);
    write_holdings_csv(dir / "holdings.csv", r);
    write_cumulative_csv(dir / "cumulative.csv", r.dates, excess_series(r));
    write_cumulative_csv(dir / "cumulative_longshort.csv", r.dates, r.long_short_returns);
    rows.push_back(compute_metrics(r, config.include_ramp_in));
  }
  write_report_csv(config.out / "report.csv", rows);
  write_report_long_csv(config.out / "report_long.csv", rows);
  write_report_longshort_csv(config.out / "report_longshort.csv", rows);
}

void run_report_command(const std::filesystem::path& run_dir, const std::filesystem::path& out_dir,
                        std::optional<bool> include_ramp_in) {
  if (!std::filesystem::is_directory(run_dir)) throw ConfigError("run directory not found: " + run_dir.string());
  std::vector<std::string> names;
  bool ramp = false;
  if (std::filesystem::exists(run_dir / "config.json")) {
    const RunConfig c = run_config_from_json(read_json(run_dir / "config.json"));
    for (const auto& m : c.models) names.push_back(m.name);
    ramp = c.include_ramp_in;
  } else {
    for (const auto& e : std::filesystem::directory_iterator(run_dir))
      if (e.is_directory() && std::filesystem::exists(e.path() / "returns.csv"))
        names.push_back(e.path().filename().string());
    std::sort(names.begin(), names.end());
  }
  if (names.empty()) throw ConfigError("no backtest outputs under " + run_dir.string());
  if (include_ramp_in) ramp = *include_ramp_in;

  std::vector<MetricsReport> rows;
  for (const auto& name : names) {
    BacktestResult r = read_backtest(run_dir / name / "returns.csv", run_dir / name / "holdings.csv");
    r.model = name;
    rows.push_back(compute_metrics(r, ramp));
  }
  std::filesystem::create_directories(out_dir);
  write_report_csv(out_dir / "report.csv", rows);
  write_report_long_csv(out_dir / "report_long.csv", rows);
  write_report_longshort_csv(out_dir / "report_longshort.csv", rows);
}

int run_app(int argc, char** argv) {
  CLI::App app{"Cross-sectional stock return prediction and backtesting"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic market panel");
  std::string synth_config, synth_out = "data";
  std::optional<std::uint64_t> synth_seed;
  std::optional<std::size_t> n_stocks, n_days;
  std::optional<double> strength, daily_vol;
  std::optional<int> signal_factor, cadence;
  std::optional<std::string> synth_start;
  synth->add_option("--config", synth_config, "JSON file with synth settings")->check(CLI::ExistingFile);
  synth->add_option("--out", synth_out, "Output directory");
  synth->add_option("--seed", synth_seed, "Random seed");
  synth->add_option("--n-stocks", n_stocks);
  synth->add_option("--n-days", n_days);
  synth->add_option("--signal-strength", strength);
  synth->add_option("--signal-factor", signal_factor);
  synth->add_option("--daily-vol", daily_vol);
  synth->add_option("--fundamental-cadence", cadence);
  synth->add_option("--start", synth_start, "First calendar date");

  // factors
  auto* factors = app.add_subcommand("factors", "Write the daily factor matrices of a panel");
  std::string f_data = "data", f_out = "factors.csv";
  std::optional<std::string> f_start, f_end;
  std::size_t f_max_missing = kDefaultMaxMissing;
  factors->add_option("--data", f_data, "Panel directory");
  factors->add_option("--out", f_out, "Output CSV path");
  factors->add_option("--start", f_start);
  factors->add_option("--end", f_end);
  factors->add_option("--max-missing", f_max_missing);

  // backtest
  auto* backtest = app.add_subcommand("backtest", "Walk-forward backtest over a model grid");
  std::string b_config;
  std::optional<std::string> b_data, b_out, b_models, b_start, b_end;
  std::optional<std::uint64_t> b_seed;
  std::optional<std::size_t> b_window;
  std::optional<int> b_threads;
  backtest->add_option("--config", b_config, "JSON run config");
  backtest->add_option("--data", b_data, "Panel directory");
  backtest->add_option("--out", b_out, "Output directory");
  backtest->add_option("--seed", b_seed);
  backtest->add_option("--models", b_models, "Comma-separated preset names");
  backtest->add_option("--start", b_start);
  backtest->add_option("--end", b_end);
  backtest->add_option("--window", b_window, "Training window length in days");
  backtest->add_option("--threads", b_threads);

  // report
  auto* report = app.add_subcommand("report", "Recompute reports from a backtest output directory");
  std::string r_run = "out";
  std::optional<std::string> r_out;
  bool r_ramp = false;
  report->add_option("--run", r_run, "Backtest output directory");
  report->add_option("--out", r_out, "Where to write the reports (default: the run directory)");
  report->add_flag("--include-ramp-in", r_ramp);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*synth) {
      SynthSpec s = synth_config.empty() ? SynthSpec{} : synth_from_json(read_json(synth_config));
      if (synth_seed) s.seed = *synth_seed;
      if (n_stocks) s.n_stocks = *n_stocks;
      if (n_days) s.n_days = *n_days;
      if (strength) s.signal_strength = *strength;
      if (signal_factor) s.signal_factor = *signal_factor;
      if (daily_vol) s.daily_vol = *daily_vol;
      if (cadence) s.fundamental_cadence = *cadence;
      if (synth_start) s.start = *synth_start;
      generate(s, synth_out);
      write_json(std::filesystem::path(synth_out) / "synth.json", synth_to_json(s));
    } else if (*factors) {
      const MarketPanel panel = load_data(f_data, 0);
      const std::size_t first = f_start ? panel.calendar.lower_bound(*f_start) : kFactorHistory;
      std::size_t last = panel.n_days();
      if (f_end) {
        last = panel.calendar.lower_bound(*f_end);
        if (last < panel.n_days() && panel.calendar.date(last) == *f_end) ++last;
      }
      std::vector<FactorMatrix> mats;
      for (std::size_t d = std::max(first, kFactorHistory); d < last; ++d) {
        const Universe u = universe_at(panel, d);
        if (u.empty()) continue;
        try {
          mats.push_back(build_factor_matrix(panel, u, f_max_missing));
        } catch (const ValidationError& e) {
          log(LogLevel::warn, e.what());
        }
      }
      write_factors_csv(f_out, panel, mats);
    } else if (*backtest) {
      RunConfig c = b_config.empty() ? default_run_config() : load_run_config(b_config);
      if (b_seed) {
        c.seed = *b_seed;
        for (auto& m : c.models) m.seed = c.seed;
      }
      if (b_data) c.data = *b_data;
      if (b_out) c.out = *b_out;
      if (b_models) c.models = parse_model_list(*b_models, c.seed);
      if (b_start) c.start = *b_start;
      if (b_end) c.end = *b_end;
      if (b_window) c.window = *b_window;
      if (b_threads) c.threads = *b_threads;
      if (c.threads < 1) throw ConfigError("threads must be at least 1");
      for (const auto* d : {&c.start, &c.end})
        if (*d && !is_iso_date(**d)) throw ConfigError("not an ISO date: '" + **d + "'");
      run_backtest_command(c);
    } else if (*report) {
      run_report_command(r_run, r_out ? std::filesystem::path(*r_out) : std::filesystem::path(r_run),
                         r_ramp ? std::optional<bool>(true) : std::nullopt);
    }
  } catch (const std::exception& e) {
    std::cerr << "xsect: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace xsect
