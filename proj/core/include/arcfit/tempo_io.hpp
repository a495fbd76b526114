#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "arcfit/multiscale.hpp"
#include "arcfit/segmenter.hpp"
#include "arcfit/series.hpp"

namespace arcfit {

inline constexpr int kFormatVersion = 1;

struct Onset {
  double beat = 0.0;
  double time = 0.0;  // seconds

  friend bool operator==(const Onset&, const Onset&) = default;
};

struct OnsetList {
  std::vector<Onset> entries;
};

enum class TempoAttribution { left, mid };

/// Instantaneous tempo from consecutive onsets: 60 * beat step / time step,
/// placed at the left onset (or the midpoint). Output has N - 1 points.
/// Throws DomainError naming the first offending index.
TempoSeries tempo_from_onsets(const OnsetList& onsets,
                              TempoAttribution at = TempoAttribution::left);

struct SampleConfig {
  double initial_tempo = 60.0;
  double tempo_floor = 1e-3;
  int max_resample = 10000;
};

struct SampleOutput {
  TempoSeries series;
  Segmentation truth;
  std::uint64_t seed = 0;
};

/// Draws a chain of arcs from the priors starting at position 0 until it
/// covers span, then observes it at the grid positions with gaussian noise.
/// Shapes whose end value would fall below the tempo floor are redrawn.
SampleOutput sample_model(const PriorSet& priors, double span, std::span<const double> grid,
                          std::uint64_t seed, const SampleConfig& config = {});

enum class OutputFormat { json, csv };

/// Formats with 17 significant digits; non-finite values become "null".
std::string format_number(double x);

// CSV input. The header row (`position,value` or `beat,time_seconds`) is
// optional; blank lines are skipped and CRLF is accepted.
TempoSeries read_series_csv(std::istream& in);
TempoSeries read_series(const std::filesystem::path& path);
OnsetList read_onsets_csv(std::istream& in);

void write_series_csv(const TempoSeries& series, std::ostream& out);

// Writers return the number of bytes written. JSON output is a single line.
std::size_t write_segmentation(const Segmentation& seg, std::ostream& out, OutputFormat format);
std::size_t write_analysis(const TwoLevelAnalysis& analysis, std::ostream& out,
                           OutputFormat format);
std::size_t write_sample(const SampleOutput& sample, std::ostream& out, OutputFormat format);
std::size_t write_prediction(const Prediction& prediction, std::ostream& out);

/// `position,observed,long_model,combined_model` rows at the data positions.
std::size_t write_plot_data(const TempoSeries& data, const TwoLevelAnalysis& analysis,
                            std::ostream& out);

enum class Scale { long_scale, short_scale };

/// Reads a segmentation document. For a two-level document, `scale` selects
/// which level is returned. Throws ParseError on schema violations.
Segmentation read_segmentation_json(std::istream& in, Scale scale = Scale::short_scale);

/// Reads the `series` member of a sample document.
TempoSeries read_sample_series_json(std::istream& in);

// Single-value JSON fragments, used by the streaming CLI.
std::string segmentation_json(const Segmentation& seg);
std::string prediction_json(const Prediction& prediction);

}  // namespace arcfit
