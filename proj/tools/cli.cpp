#include "cli.hpp"

#include <CLI11.hpp>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <memory>
#include <optional>
#include <ostream>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>
#include <sstream>

#include "arcfit/errors.hpp"
#include "arcfit/multiscale.hpp"
#include "arcfit/segmenter.hpp"
#include "arcfit/tempo_io.hpp"

namespace arcfit::cli {
namespace {

const double kDefaultCurvatureMean = std::log(8.0);

struct ShapeFlags {
  double slope_mean = 0.0;
  double slope_sd = 10.0;
  double curv_mean = kDefaultCurvatureMean;
  double curv_sd = 1.0;
  double noise_sd = 3.0;
  double beats_per_bar = 4.0;
};

struct DurationFlags {
  std::optional<double> log_mean;
  std::optional<double> median_bars;
  double log_sd = 0.5;
  double default_median_bars = 4.0;

  LogNormalPrior resolve(double beats_per_bar) const {
    LogNormalPrior d;
    d.log_sd = log_sd;
    if (log_mean) {
      d.log_mean = *log_mean;
    } else {
      const double bars = median_bars.value_or(default_median_bars);
      if (!(bars > 0.0) || !(beats_per_bar > 0.0)) {
        throw DomainError("duration median and beats per bar must be positive");
      }
      d.log_mean = std::log(bars * beats_per_bar);
    }
    return d;
  }
};

struct InputFlags {
  std::string path;
  bool onsets = false;
  std::string tempo_at = "left";
};

struct GridFlags {
  std::optional<double> step;
  std::optional<std::size_t> points;
};

void add_shape_options(CLI::App& sub, ShapeFlags& f) {
  sub.add_option("--slope-mean", f.slope_mean, "Mean of the slope prior")->capture_default_str();
  sub.add_option("--slope-sd", f.slope_sd, "SD of the slope prior")->capture_default_str();
  sub.add_option("--curv-mean", f.curv_mean, "Mean of the log-curvature prior")
      ->capture_default_str();
  sub.add_option("--curv-sd", f.curv_sd, "SD of the log-curvature prior")->capture_default_str();
  sub.add_option("--noise-sd", f.noise_sd, "SD of the observation noise")->capture_default_str();
  sub.add_option("--beats-per-bar", f.beats_per_bar, "Beats per bar for bar-based flags")
      ->capture_default_str();
}

void add_duration_options(CLI::App& sub, DurationFlags& d, const std::string& prefix) {
  auto* lm = sub.add_option("--" + prefix + "dur-logmean", d.log_mean,
                            "Duration prior log-mean (log beats)");
  auto* mb = sub.add_option("--" + prefix + "dur-median-bars", d.median_bars,
                            "Duration prior median in bars (sets log-mean = ln(N * beats-per-bar))");
  lm->excludes(mb);
  sub.add_option("--" + prefix + "dur-logsd", d.log_sd, "Duration prior log-sd")
      ->capture_default_str();
}

void add_input_options(CLI::App& sub, InputFlags& in) {
  sub.add_option("input,--input,-i", in.path, "Input CSV path, or - for standard input");
  sub.add_flag("--onsets", in.onsets, "Input is `beat,time_seconds` onsets, converted to tempo");
  sub.add_option("--tempo-at", in.tempo_at, "Where onset-derived tempo is placed")
      ->check(CLI::IsMember({"left", "mid"}))
      ->capture_default_str();
}

void add_grid_options(CLI::App& sub, GridFlags& g) {
  sub.add_option("--grid-step", g.step,
                 "Spacing of hypothetical future breakpoints (default: median data interval)");
  sub.add_option("--grid-points", g.points, "Number of hypothetical points (default: K)");
}

PriorSet make_priors(const ShapeFlags& s, const DurationFlags& d) {
  PriorSet p;
  p.slope = {s.slope_mean, s.slope_sd};
  p.curvature = {s.curv_mean, s.curv_sd};
  p.duration = d.resolve(s.beats_per_bar);
  p.noise_sd = s.noise_sd;
  p.validate();
  return p;
}

// Reads the whole input, then dispatches on its shape: a JSON sample document
// (as written by `arcfit sample`) or CSV.
TempoSeries load_series(const InputFlags& f, std::istream& in) {
  if (f.path.empty()) throw ValidationError("no input given (use --input PATH or -)");
  std::stringstream buffer;
  if (f.path == "-") {
    buffer << in.rdbuf();
  } else {
    std::ifstream file(f.path);
    if (!file) throw IoError("cannot open input file '" + f.path + "'");
    buffer << file.rdbuf();
  }
  const std::string text = buffer.str();
  const auto first = text.find_first_not_of(" \t\r\n");
  std::istringstream src(text);
  TempoSeries series;
  if (f.onsets) {
    const auto at = f.tempo_at == "mid" ? TempoAttribution::mid : TempoAttribution::left;
    series = tempo_from_onsets(read_onsets_csv(src), at);
  } else if (first != std::string::npos && text[first] == '{') {
    series = read_sample_series_json(src);
  } else {
    series = read_series_csv(src);
  }
  series.validate();
  return series;
}

std::vector<double> make_grid(const SegmenterState& state, const GridFlags& g) {
  if (!g.step && !g.points) return state.default_grid();
  if (state.empty()) return {};
  std::vector<double> grid;
  const std::size_t count = g.points.value_or(state.max_lookback());
  double step = 0.0;
  if (g.step) {
    step = *g.step;
  } else {
    const auto def = state.default_grid();
    if (def.empty()) return {};
    step = def.front() - state.positions().back();
  }
  if (!(step > 0.0)) throw DomainError("grid step must be positive");
  for (std::size_t j = 1; j <= count; ++j) {
    grid.push_back(state.positions().back() + static_cast<double>(j) * step);
  }
  return grid;
}

OutputFormat parse_format(const std::string& s) {
  return s == "csv" ? OutputFormat::csv : OutputFormat::json;
}

std::shared_ptr<spdlog::logger> make_logger(std::ostream& err) {
  auto sink = std::make_shared<spdlog::sinks::ostream_sink_st>(err);
  auto log = std::make_shared<spdlog::logger>("arcfit", sink);
  log->set_pattern("arcfit: [%l] %v");
  const char* env = std::getenv("ARCFIT_LOG");
  const std::string level = env ? env : "quiet";
  if (level == "quiet") {
    log->set_level(spdlog::level::off);
  } else if (level == "info") {
    log->set_level(spdlog::level::info);
  } else if (level == "debug") {
    log->set_level(spdlog::level::debug);
  } else {
    throw ValidationError("ARCFIT_LOG must be one of quiet, info, debug (got '" + level + "')");
  }
  return log;
}

}  // namespace

int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out,
        std::ostream& err) {
  CLI::App app{"MAP segmentation of time series into continuous concave arcs", "arcfit"};
  app.require_subcommand(1);

  ShapeFlags shape;
  DurationFlags duration;
  DurationFlags long_duration;
  DurationFlags short_duration;
  short_duration.default_median_bars = 1.0;
  InputFlags input;
  GridFlags grid;
  std::size_t lookback = kDefaultMaxLookback;
  std::string format = "json";
  std::optional<double> short_noise_sd;
  std::string plot_out;
  bool predict_each = false;
  std::uint64_t seed = 0;
  double span = 0.0;
  double step = 1.0;
  double initial_tempo = 60.0;
  double bar_length = 0.0;
  std::string scale = "short";

  auto add_k = [&](CLI::App& sub) {
    sub.add_option("--k", lookback, "Maximum candidate arc starts searched per datum")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
  };
  auto add_format = [&](CLI::App& sub) {
    sub.add_option("--format", format, "Output format")
        ->check(CLI::IsMember({"json", "csv"}))
        ->capture_default_str();
  };

  auto* fit = app.add_subcommand("fit", "Fit the MAP arc chain to a series");
  add_input_options(*fit, input);
  add_shape_options(*fit, shape);
  add_duration_options(*fit, duration, "");
  add_k(*fit);
  add_format(*fit);

  auto* stream = app.add_subcommand("stream", "Online fitting of `position,value` lines");
  add_input_options(*stream, input);
  add_shape_options(*stream, shape);
  add_duration_options(*stream, duration, "");
  add_k(*stream);
  add_grid_options(*stream, grid);
  stream->add_flag("--predict-each", predict_each, "Attach a prediction to every update");

  auto* predict = app.add_subcommand("predict", "Predict the arc in progress past the data");
  add_input_options(*predict, input);
  add_shape_options(*predict, shape);
  add_duration_options(*predict, duration, "");
  add_k(*predict);
  add_grid_options(*predict, grid);

  auto* multiscale = app.add_subcommand("multiscale", "Two-pass long/short timescale analysis");
  add_input_options(*multiscale, input);
  add_shape_options(*multiscale, shape);
  add_duration_options(*multiscale, long_duration, "long-");
  add_duration_options(*multiscale, short_duration, "short-");
  multiscale->add_option("--short-noise-sd", short_noise_sd,
                         "Noise SD for the residual pass (default: --noise-sd)");
  add_k(*multiscale);
  add_format(*multiscale);
  multiscale->add_option("--plot-out", plot_out,
                         "Write `position,observed,long_model,combined_model` CSV here");

  auto* sample = app.add_subcommand("sample", "Draw a synthetic series from the model");
  add_shape_options(*sample, shape);
  add_duration_options(*sample, duration, "");
  sample->add_option("--seed", seed, "Random seed")->capture_default_str();
  sample->add_option("--span", span, "Length of the series in beats")->required();
  sample->add_option("--step", step, "Observation spacing in beats")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  sample->add_option("--initial-tempo", initial_tempo, "Starting value")->capture_default_str();
  add_format(*sample);

  auto* deviance = app.add_subcommand("deviance", "Breakpoint distance from barlines");
  add_input_options(*deviance, input);
  deviance->add_option("--bar-length", bar_length, "Bar length in beats")->required();
  deviance->add_option("--scale", scale, "Level of a two-level document to use")
      ->check(CLI::IsMember({"short", "long"}))
      ->capture_default_str();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsageError;
  }

  try {
    auto log = make_logger(err);

    if (fit->parsed()) {
      const PriorSet priors = make_priors(shape, duration);
      const TempoSeries data = load_series(input, in);
      log->info("fitting {} points with K = {}", data.size(), lookback);
      const Segmentation seg = fit_series(data, priors, lookback);
      log->info("{} arcs, total logMAP {}", seg.arcs.size(), seg.total_log_map);
      write_segmentation(seg, out, parse_format(format));
      return kOk;
    }

    if (stream->parsed()) {
      const PriorSet priors = make_priors(shape, duration);
      SegmenterState state(priors, lookback);
      std::ifstream file;
      std::istream* src = &in;
      if (!input.path.empty() && input.path != "-") {
        file.open(input.path);
        if (!file) throw IoError("cannot open input file '" + input.path + "'");
        src = &file;
      }
      std::string line;
      std::size_t lineno = 0;
      while (std::getline(*src, line)) {
        ++lineno;
        std::istringstream one(line + "\n");
        TempoSeries rows;
        try {
          rows = read_series_csv(one);
        } catch (const ParseError&) {
          throw ParseError("malformed row '" + line + "'", lineno);
        }
        if (rows.empty()) continue;
        const Observation obs = rows.points.front();
        try {
          state.update(obs);
        } catch (const DomainError& e) {
          throw ParseError(e.what(), lineno);
        }
        std::string msg = "{\"index\":" + std::to_string(state.size() - 1) +
                          ",\"position\":" + format_number(obs.position) +
                          ",\"value\":" + format_number(obs.value) +
                          ",\"fits\":" + std::to_string(state.last_update_fits());
        if (state.size() >= 2) {
          const Segmentation seg = state.finalize();
          msg += ",\"total_log_map\":" + format_number(seg.total_log_map) + ",\"arcs\":" +
                 std::to_string(seg.arcs.size()) + ",\"breakpoints\":[";
          for (std::size_t i = 0; i < seg.breakpoints.size(); ++i) {
            msg += (i ? "," : "") + format_number(seg.breakpoints[i]);
          }
          msg += "]";
        }
        if (predict_each) {
          const auto g = make_grid(state, grid);
          if (state.size() >= 2 || !g.empty()) {
            msg += ",\"prediction\":" + prediction_json(state.predict(g));
          }
        }
        msg += "}\n";
        out << msg;
        out.flush();
        log->debug("update {} done ({} fits)", state.size() - 1, state.last_update_fits());
      }
      if (state.size() < 2) throw ValidationError("stream needs at least two data");
      write_segmentation(state.finalize(), out, OutputFormat::json);
      return kOk;
    }

    if (predict->parsed()) {
      const PriorSet priors = make_priors(shape, duration);
      const TempoSeries data = load_series(input, in);
      SegmenterState state(priors, lookback);
      for (const auto& obs : data.points) state.update(obs);
      const auto g = make_grid(state, grid);
      log->info("predicting over {} hypothetical points", g.size());
      write_prediction(state.predict(g), out);
      return kOk;
    }

    if (multiscale->parsed()) {
      const PriorSet long_priors = make_priors(shape, long_duration);
      ShapeFlags short_shape = shape;
      if (short_noise_sd) short_shape.noise_sd = *short_noise_sd;
      const PriorSet short_priors = make_priors(short_shape, short_duration);
      const TempoSeries data = load_series(input, in);
      const TwoLevelAnalysis analysis = decompose(data, long_priors, short_priors, lookback);
      log->info("long scale: {} arcs, short scale: {} arcs", analysis.long_scale.arcs.size(),
                analysis.short_scale.arcs.size());
      if (!plot_out.empty()) {
        std::ofstream plot(plot_out);
        if (!plot) throw IoError("cannot open plot output '" + plot_out + "'");
        write_plot_data(data, analysis, plot);
      }
      write_analysis(analysis, out, parse_format(format));
      return kOk;
    }

    if (sample->parsed()) {
      const PriorSet priors = make_priors(shape, duration);
      if (!(span > 0.0)) throw DomainError("--span must be positive");
      std::vector<double> positions;
      for (std::size_t i = 0;; ++i) {
        const double x = static_cast<double>(i) * step;
        if (x > span) break;
        positions.push_back(x);
      }
      SampleConfig cfg;
      cfg.initial_tempo = initial_tempo;
      const SampleOutput s = sample_model(priors, span, positions, seed, cfg);
      log->info("sampled {} arcs over {} beats", s.truth.arcs.size(), span);
      write_sample(s, out, parse_format(format));
      return kOk;
    }

    if (deviance->parsed()) {
      if (input.path.empty()) throw ValidationError("no input given (use --input PATH or -)");
      std::ifstream file;
      std::istream* src = &in;
      if (input.path != "-") {
        file.open(input.path);
        if (!file) throw IoError("cannot open input file '" + input.path + "'");
        src = &file;
      }
      const Segmentation seg = read_segmentation_json(
          *src, scale == "long" ? Scale::long_scale : Scale::short_scale);
      const DevianceReport report = mean_barline_deviance(seg, bar_length);
      std::string msg = "{\"bar_length\":" + format_number(bar_length) + ",\"mean_deviance\":" +
                        (report.mean_deviance ? format_number(*report.mean_deviance) : "null") +
                        ",\"per_breakpoint\":[";
      for (std::size_t i = 0; i < report.per_breakpoint.size(); ++i) {
        const auto& [pos, dev] = report.per_breakpoint[i];
        msg += std::string(i ? "," : "") + "{\"position\":" + format_number(pos) +
               ",\"deviance\":" + format_number(dev) + "}";
      }
      msg += "]}\n";
      out << msg;
      if (!report.mean_deviance) log->info("no interior breakpoints; mean deviance undefined");
      return kOk;
    }
  } catch (const OptimizerError& e) {
    err << "arcfit: optimizer failure: " << e.what() << " (best value " << e.value() << ")\n";
    return kOptimizerError;
  } catch (const DomainError& e) {
    err << "arcfit: " << e.what() << "\n";
    return kUsageError;
  } catch (const ValidationError& e) {
    err << "arcfit: " << e.what() << "\n";
    return kUsageError;
  } catch (const ParseError& e) {
    err << "arcfit: " << e.what() << "\n";
    return kUsageError;
  } catch (const IoError& e) {
    err << "arcfit: " << e.what() << "\n";
    return kUsageError;
  } catch (const std::exception& e) {
    err << "arcfit: internal error: " << e.what() << "\n";
    return kInternalError;
  }
  return kUsageError;
}

}  // namespace arcfit::cli
