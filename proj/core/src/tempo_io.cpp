#include "arcfit/tempo_io.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <nlohmann/json.hpp>
#include <ostream>
#include <random>
#include <sstream>
#include <string_view>

#include "arcfit/errors.hpp"

namespace arcfit {
namespace {

// Minimal JSON emitter with a fixed key order and 17-significant-digit
// numbers, so identical inputs always give identical bytes.
class JsonWriter {
 public:
  JsonWriter& begin_object() { return open('{'); }
  JsonWriter& end_object() { return close('}'); }
  JsonWriter& begin_array() { return open('['); }
  JsonWriter& end_array() { return close(']'); }

  JsonWriter& key(std::string_view k) {
    separator();
    out_ += nlohmann::json(std::string(k)).dump();
    out_ += ':';
    after_key_ = true;
    return *this;
  }
  JsonWriter& number(double v) {
    separator();
    out_ += format_number(v);
    return *this;
  }
  JsonWriter& integer(std::uint64_t v) {
    separator();
    out_ += std::to_string(v);
    return *this;
  }
  JsonWriter& boolean(bool v) {
    separator();
    out_ += v ? "true" : "false";
    return *this;
  }
  JsonWriter& raw(std::string_view fragment) {
    separator();
    out_ += fragment;
    return *this;
  }

  const std::string& str() const { return out_; }

 private:
  JsonWriter& open(char c) {
    separator();
    out_ += c;
    first_ = true;
    return *this;
  }
  JsonWriter& close(char c) {
    out_ += c;
    first_ = false;
    return *this;
  }
  void separator() {
    if (after_key_) {
      after_key_ = false;
      return;
    }
    if (!first_ && !out_.empty()) out_ += ',';
    first_ = false;
  }

  std::string out_;
  bool first_ = true;
  bool after_key_ = false;
};

void write_arc(JsonWriter& w, const FittedArc& arc) {
  w.begin_object()
      .key("start_pos").number(arc.start_pos)
      .key("end_pos").number(arc.end_pos)
      .key("a").number(arc.params.a)
      .key("b").number(arc.params.b)
      .key("c").number(arc.params.c)
      .key("log_map").number(arc.log_map)
      .end_object();
}

void write_segmentation_body(JsonWriter& w, const Segmentation& seg) {
  w.key("total_log_map").number(seg.total_log_map);
  w.key("breakpoints").begin_array();
  for (double b : seg.breakpoints) w.number(b);
  w.end_array();
  if (!seg.breakpoint_indices.empty()) {
    w.key("breakpoint_indices").begin_array();
    for (std::size_t i : seg.breakpoint_indices) w.integer(i);
    w.end_array();
  }
  w.key("arcs").begin_array();
  for (const FittedArc& arc : seg.arcs) write_arc(w, arc);
  w.end_array();
}

std::size_t emit(std::ostream& out, const std::string& text) {
  out << text;
  if (!out) throw IoError("failed to write output");
  return text.size();
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

bool parse_double(std::string_view s, double& out) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return false;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out);
}

// Reads two numeric columns; a first non-blank line that is not numeric must
// equal the expected header.
std::vector<std::array<double, 2>> read_pairs(std::istream& in, std::string_view header,
                                              std::vector<std::size_t>& lines) {
  std::vector<std::array<double, 2>> rows;
  std::string line;
  std::size_t lineno = 0;
  bool seen_content = false;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view text = trim(line);
    if (lineno == 1 && text.starts_with("\xEF\xBB\xBF")) text.remove_prefix(3);
    if (text.empty()) continue;
    const auto comma = text.find(',');
    if (comma == std::string_view::npos || text.find(',', comma + 1) != std::string_view::npos) {
      throw ParseError("expected two comma-separated fields", lineno);
    }
    double x = 0.0, y = 0.0;
    const bool ok_x = parse_double(text.substr(0, comma), x);
    const bool ok_y = parse_double(text.substr(comma + 1), y);
    if (!seen_content && !ok_x) {
      seen_content = true;
      std::string normalized;
      normalized += trim(text.substr(0, comma));
      normalized += ',';
      normalized += trim(text.substr(comma + 1));
      if (normalized != header) {
        throw ParseError("unexpected header '" + normalized + "', expected '" +
                             std::string(header) + "'",
                         lineno);
      }
      continue;
    }
    seen_content = true;
    if (!ok_x || !ok_y) {
      throw ParseError("malformed numeric row '" + std::string(text) + "'", lineno);
    }
    rows.push_back({x, y});
    lines.push_back(lineno);
  }
  return rows;
}

FittedArc arc_from_json(const nlohmann::json& j) {
  FittedArc arc;
  arc.start_pos = j.at("start_pos").get<double>();
  arc.end_pos = j.at("end_pos").get<double>();
  arc.params.a = j.at("a").get<double>();
  arc.params.b = j.at("b").get<double>();
  arc.params.c = j.at("c").get<double>();
  arc.log_map = j.at("log_map").is_null() ? std::numeric_limits<double>::quiet_NaN()
                                          : j.at("log_map").get<double>();
  return arc;
}

Segmentation segmentation_from_json(const nlohmann::json& j) {
  Segmentation seg;
  for (const auto& a : j.at("arcs")) seg.arcs.push_back(arc_from_json(a));
  if (seg.arcs.empty()) throw ParseError("segmentation has no arcs", 1);
  seg.total_log_map = j.at("total_log_map").get<double>();
  if (j.contains("breakpoints")) {
    seg.breakpoints = j.at("breakpoints").get<std::vector<double>>();
  } else {
    seg.breakpoints.push_back(seg.arcs.front().start_pos);
    for (const auto& arc : seg.arcs) seg.breakpoints.push_back(arc.end_pos);
  }
  if (j.contains("breakpoint_indices")) {
    seg.breakpoint_indices = j.at("breakpoint_indices").get<std::vector<std::size_t>>();
  }
  return seg;
}

nlohmann::json parse_document(std::istream& in) {
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("invalid JSON: ") + e.what(), 1);
  }
}

void check_version(const nlohmann::json& doc) {
  if (doc.contains("format_version") && doc.at("format_version") != kFormatVersion) {
    throw ParseError("unsupported format_version " + doc.at("format_version").dump(), 1);
  }
}

}  // namespace

std::string format_number(double x) {
  if (!std::isfinite(x)) return "null";
  std::array<char, 64> buf{};
  const auto [ptr, ec] =
      std::to_chars(buf.data(), buf.data() + buf.size(), x, std::chars_format::general, 17);
  return std::string(buf.data(), ptr);
}

TempoSeries tempo_from_onsets(const OnsetList& onsets, TempoAttribution at) {
  const auto& e = onsets.entries;
  if (e.size() < 2) throw DomainError("need at least two onsets");
  for (std::size_t i = 0; i < e.size(); ++i) {
    if (!std::isfinite(e[i].beat) || !std::isfinite(e[i].time)) {
      throw DomainError("non-finite onset at index " + std::to_string(i));
    }
    if (i > 0 && !(e[i].time > e[i - 1].time)) {
      throw DomainError("onset times not strictly increasing at index " + std::to_string(i));
    }
    if (i > 0 && !(e[i].beat > e[i - 1].beat)) {
      throw DomainError("onset beats not strictly increasing at index " + std::to_string(i));
    }
  }
  TempoSeries out;
  out.points.reserve(e.size() - 1);
  for (std::size_t i = 0; i + 1 < e.size(); ++i) {
    const double tempo = 60.0 * (e[i + 1].beat - e[i].beat) / (e[i + 1].time - e[i].time);
    const double pos = at == TempoAttribution::left ? e[i].beat : 0.5 * (e[i].beat + e[i + 1].beat);
    out.points.push_back({pos, tempo});
  }
  return out;
}

SampleOutput sample_model(const PriorSet& priors, double span, std::span<const double> grid,
                          std::uint64_t seed, const SampleConfig& config) {
  priors.validate();
  if (!std::isfinite(span) || !(span > 0.0)) throw DomainError("span must be positive");
  if (grid.empty()) throw DomainError("observation grid is empty");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!(grid[i] >= 0.0 && grid[i] <= span) || (i > 0 && !(grid[i] > grid[i - 1]))) {
      throw DomainError("observation grid must be increasing and within [0, span]");
    }
  }
  if (!(config.initial_tempo >= config.tempo_floor)) {
    throw DomainError("initial tempo is below the tempo floor");
  }

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  SampleOutput out;
  out.seed = seed;
  Segmentation& truth = out.truth;
  double pos = 0.0;
  double value = config.initial_tempo;
  truth.breakpoints.push_back(pos);
  while (pos < span) {
    const double dur = std::exp(priors.duration.log_mean + priors.duration.log_sd * normal(rng));
    ArcParams p;
    p.a = value;
    int tries = 0;
    do {
      if (++tries > config.max_resample) {
        throw DomainError("could not draw an arc that stays above the tempo floor");
      }
      p.b = priors.slope.mean + priors.slope.sd * normal(rng);
      p.c = priors.curvature.mean + priors.curvature.sd * normal(rng);
      // a concave arc attains its minimum over [0, 1] at an end point
    } while (!(eval_arc(p, 1.0) >= config.tempo_floor));
    FittedArc arc{pos, pos + dur, p, 0.0};
    truth.arcs.push_back(arc);
    pos = arc.end_pos;
    value = arc.end_value();
    truth.breakpoints.push_back(pos);
  }

  out.series.points.reserve(grid.size());
  for (double x : grid) {
    const double noise = priors.noise_sd * normal(rng);
    out.series.points.push_back({x, truth.value_at(x) + noise});
  }
  return out;
}

TempoSeries read_series_csv(std::istream& in) {
  std::vector<std::size_t> lines;
  const auto rows = read_pairs(in, "position,value", lines);
  TempoSeries s;
  s.points.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (i > 0 && !(rows[i][0] > rows[i - 1][0])) {
      throw ValidationError("line " + std::to_string(lines[i]) +
                            ": positions must be strictly increasing");
    }
    s.points.push_back({rows[i][0], rows[i][1]});
  }
  return s;
}

TempoSeries read_series(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open input file '" + path.string() + "'");
  return read_series_csv(in);
}

OnsetList read_onsets_csv(std::istream& in) {
  std::vector<std::size_t> lines;
  const auto rows = read_pairs(in, "beat,time_seconds", lines);
  OnsetList out;
  out.entries.reserve(rows.size());
  for (const auto& r : rows) out.entries.push_back({r[0], r[1]});
  return out;
}

void write_series_csv(const TempoSeries& series, std::ostream& out) {
  std::string text = "position,value\n";
  for (const auto& p : series.points) {
    text += format_number(p.position) + "," + format_number(p.value) + "\n";
  }
  emit(out, text);
}

std::string segmentation_json(const Segmentation& seg) {
  JsonWriter w;
  w.begin_object().key("format_version").integer(kFormatVersion);
  write_segmentation_body(w, seg);
  w.end_object();
  return w.str();
}

std::size_t write_segmentation(const Segmentation& seg, std::ostream& out, OutputFormat format) {
  if (format == OutputFormat::json) return emit(out, segmentation_json(seg) + "\n");
  std::string text = "start_pos,end_pos,a,b,c,log_map\n";
  for (const auto& arc : seg.arcs) {
    text += format_number(arc.start_pos) + "," + format_number(arc.end_pos) + "," +
            format_number(arc.params.a) + "," + format_number(arc.params.b) + "," +
            format_number(arc.params.c) + "," + format_number(arc.log_map) + "\n";
  }
  return emit(out, text);
}

std::size_t write_analysis(const TwoLevelAnalysis& analysis, std::ostream& out,
                           OutputFormat format) {
  if (format == OutputFormat::json) {
    JsonWriter w;
    w.begin_object().key("format_version").integer(kFormatVersion);
    w.key("long_scale").begin_object();
    write_segmentation_body(w, analysis.long_scale);
    w.end_object();
    w.key("short_scale").begin_object();
    write_segmentation_body(w, analysis.short_scale);
    w.end_object();
    w.end_object();
    return emit(out, w.str() + "\n");
  }
  std::string text = "scale,start_pos,end_pos,a,b,c,log_map\n";
  auto rows = [&](const char* name, const Segmentation& seg) {
    for (const auto& arc : seg.arcs) {
      text += std::string(name) + "," + format_number(arc.start_pos) + "," +
              format_number(arc.end_pos) + "," + format_number(arc.params.a) + "," +
              format_number(arc.params.b) + "," + format_number(arc.params.c) + "," +
              format_number(arc.log_map) + "\n";
    }
  };
  rows("long", analysis.long_scale);
  rows("short", analysis.short_scale);
  return emit(out, text);
}

std::size_t write_sample(const SampleOutput& sample, std::ostream& out, OutputFormat format) {
  if (format == OutputFormat::csv) {
    std::ostringstream os;
    write_series_csv(sample.series, os);
    return emit(out, os.str());
  }
  JsonWriter w;
  w.begin_object().key("format_version").integer(kFormatVersion);
  w.key("seed").integer(sample.seed);
  w.key("series").begin_array();
  for (const auto& p : sample.series.points) {
    w.begin_object().key("position").number(p.position).key("value").number(p.value).end_object();
  }
  w.end_array();
  w.key("truth").begin_object();
  write_segmentation_body(w, sample.truth);
  w.end_object();
  w.end_object();
  return emit(out, w.str() + "\n");
}

std::string prediction_json(const Prediction& prediction) {
  JsonWriter w;
  w.begin_object()
      .key("chosen_end").number(prediction.chosen_end)
      .key("hypothetical").boolean(prediction.hypothetical)
      .key("arc_start_index").integer(prediction.arc_start_index)
      .key("total_log_map").number(prediction.total_log_map)
      .key("arc");
  write_arc(w, prediction.arc);
  w.key("trajectory").begin_array();
  for (const auto& p : prediction.trajectory) {
    w.begin_object().key("position").number(p.position).key("value").number(p.value).end_object();
  }
  w.end_array().end_object();
  return w.str();
}

std::size_t write_prediction(const Prediction& prediction, std::ostream& out) {
  return emit(out, prediction_json(prediction) + "\n");
}

std::size_t write_plot_data(const TempoSeries& data, const TwoLevelAnalysis& analysis,
                            std::ostream& out) {
  std::string text = "position,observed,long_model,combined_model\n";
  for (const auto& p : data.points) {
    const double long_model = analysis.long_scale.value_at(p.position);
    const double combined = long_model + analysis.short_scale.value_at(p.position);
    text += format_number(p.position) + "," + format_number(p.value) + "," +
            format_number(long_model) + "," + format_number(combined) + "\n";
  }
  return emit(out, text);
}

Segmentation read_segmentation_json(std::istream& in, Scale scale) {
  const nlohmann::json doc = parse_document(in);
  check_version(doc);
  try {
    if (doc.contains("long_scale") || doc.contains("short_scale")) {
      return segmentation_from_json(
          doc.at(scale == Scale::long_scale ? "long_scale" : "short_scale"));
    }
    if (doc.contains("truth") && !doc.contains("arcs")) {
      return segmentation_from_json(doc.at("truth"));
    }
    return segmentation_from_json(doc);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("segmentation schema violation: ") + e.what(), 1);
  }
}

TempoSeries read_sample_series_json(std::istream& in) {
  const nlohmann::json doc = parse_document(in);
  check_version(doc);
  TempoSeries s;
  try {
    for (const auto& p : doc.at("series")) {
      s.points.push_back({p.at("position").get<double>(), p.at("value").get<double>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("sample schema violation: ") + e.what(), 1);
  }
  s.validate();
  return s;
}

}  // namespace arcfit
