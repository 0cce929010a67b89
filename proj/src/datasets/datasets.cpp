#include "datasets/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "common/errors.hpp"
#include "diffcore/rng.hpp"

namespace ctae {

void RegionRecording::validate() const {
  if (trials <= 0 || channels <= 0 || t_len <= 0)
    fail(ErrorKind::shape, "recording needs positive trials, channels, and bins");
  if (values.shape != std::vector<int64_t>({trials, channels, t_len}))
    fail(ErrorKind::shape, "recording values must be [K,N,T], got " + shape_str(values.shape));
  if (!labels.empty() && static_cast<int64_t>(labels.size()) != trials)
    fail(ErrorKind::shape, "label list must have one entry per trial");
  for (const double v : values.data) {
    if (!std::isfinite(v)) fail(ErrorKind::numeric, "recording contains a non-finite value");
    if (counts && (v < 0 || v != std::floor(v)))
      fail(ErrorKind::numeric, "counts mode requires non-negative integers");
  }
}

RegionRecording bin_spikes(const std::vector<std::vector<std::vector<double>>>& events,
                           double bin_ms, int64_t t_len, int64_t region_id) {
  if (events.empty()) fail(ErrorKind::shape, "bin_spikes needs at least one trial");
  if (bin_ms <= 0) fail(ErrorKind::config, "bin width must be positive");
  if (t_len <= 0) fail(ErrorKind::config, "bin_spikes needs t_len >= 1");
  const int64_t K = static_cast<int64_t>(events.size());
  const int64_t N = static_cast<int64_t>(events[0].size());
  if (N == 0) fail(ErrorKind::shape, "bin_spikes needs at least one channel");

  RegionRecording rec;
  rec.region_id = region_id;
  rec.trials = K;
  rec.channels = N;
  rec.t_len = t_len;
  rec.bin_ms = bin_ms;
  rec.counts = true;
  rec.values = DenseArray<double>::zeros({K, N, t_len});

  const double window_s = static_cast<double>(t_len) * bin_ms / 1000.0;
  for (int64_t k = 0; k < K; ++k) {
    if (static_cast<int64_t>(events[static_cast<size_t>(k)].size()) != N)
      fail(ErrorKind::shape, "trial " + std::to_string(k) + " has inconsistent channel count");
    for (int64_t n = 0; n < N; ++n)
      for (const double t : events[static_cast<size_t>(k)][static_cast<size_t>(n)]) {
        if (t < 0)
          fail(ErrorKind::config, "event at negative time " + std::to_string(t));
        if (t >= window_s)
          fail(ErrorKind::config, "event at " + std::to_string(t) +
                                       " s outside the trial window of " +
                                       std::to_string(window_s) + " s");
        const int64_t bin = static_cast<int64_t>(std::floor(t * 1000.0 / bin_ms));
        rec.values.data[static_cast<size_t>((k * N + n) * t_len + bin)] += 1.0;
      }
  }
  return rec;
}

std::vector<double> gaussian_kernel(int64_t kernel) {
  if (kernel < 1) fail(ErrorKind::config, "smoothing kernel size must be >= 1");
  const double sigma = static_cast<double>(kernel) / 2.0;
  std::vector<double> w(static_cast<size_t>(2 * kernel + 1));
  double sum = 0;
  for (int64_t j = -kernel; j <= kernel; ++j) {
    const double x = static_cast<double>(j);
    w[static_cast<size_t>(j + kernel)] = std::exp(-x * x / (2.0 * sigma * sigma));
    sum += w[static_cast<size_t>(j + kernel)];
  }
  for (auto& v : w) v /= sum;
  return w;
}

namespace {

int64_t reflect_index(int64_t i, int64_t n) {
  // mirror across the boundary without repeating the edge sample
  while (i < 0 || i >= n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * n - 2 - i;
    if (n == 1) return 0;
  }
  return i;
}

void smooth_rows(double* data, int64_t rows, int64_t t_len, int64_t kernel) {
  const auto w = gaussian_kernel(kernel);
  std::vector<double> tmp(static_cast<size_t>(t_len));
  for (int64_t r = 0; r < rows; ++r) {
    double* row = data + r * t_len;
    for (int64_t t = 0; t < t_len; ++t) {
      double acc = 0;
      for (int64_t j = -kernel; j <= kernel; ++j)
        acc += w[static_cast<size_t>(j + kernel)] * row[reflect_index(t + j, t_len)];
      tmp[static_cast<size_t>(t)] = acc;
    }
    std::copy(tmp.begin(), tmp.end(), row);
  }
}

}  // namespace

namespace detail {
void smooth_rows_inplace(double* data, int64_t rows, int64_t t_len, int64_t kernel) {
  smooth_rows(data, rows, t_len, kernel);
}
}  // namespace detail

RegionRecording gaussian_smooth(const RegionRecording& rec, int64_t kernel) {
  rec.validate();
  RegionRecording out = rec;
  out.counts = false;
  smooth_rows(out.values.data.data(), rec.trials * rec.channels, rec.t_len, kernel);
  return out;
}

namespace {

// Deals each class's shuffled indices into contiguous spans whose boundaries
// are the rounded cumulative fractions, so every split receives its
// proportional share within one trial.
std::vector<std::vector<int64_t>> deal_stratified(int64_t trials,
                                                  const std::vector<double>& fractions,
                                                  const std::vector<int64_t>& labels,
                                                  uint64_t seed) {
  if (trials <= 0) fail(ErrorKind::config, "split needs at least one trial");
  if (fractions.empty()) fail(ErrorKind::config, "split needs at least one fraction");
  double sum = 0;
  for (const double f : fractions) {
    if (f <= 0) fail(ErrorKind::config, "split fractions must be positive");
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    fail(ErrorKind::config, "split fractions must sum to 1");
  if (!labels.empty() && static_cast<int64_t>(labels.size()) != trials)
    fail(ErrorKind::shape, "label list must have one entry per trial");

  std::map<int64_t, std::vector<int64_t>> classes;
  if (labels.empty()) {
    auto& all = classes[0];
    for (int64_t i = 0; i < trials; ++i) all.push_back(i);
  } else {
    for (int64_t i = 0; i < trials; ++i) classes[labels[static_cast<size_t>(i)]].push_back(i);
  }

  Rng rng(seed);
  const size_t n_splits = fractions.size();
  std::vector<std::vector<int64_t>> splits(n_splits);
  for (auto& [label, members] : classes) {
    const int64_t n = static_cast<int64_t>(members.size());
    const auto perm = rng.permutation(n);
    double cum = 0;
    int64_t prev = 0;
    for (size_t s = 0; s < n_splits; ++s) {
      cum += fractions[s];
      const int64_t upto =
          s + 1 == n_splits ? n : std::llround(cum * static_cast<double>(n));
      if (upto <= prev)
        fail(ErrorKind::config, "split " + std::to_string(s) + " would receive zero trials of class " +
                                    std::to_string(label));
      for (int64_t i = prev; i < upto; ++i)
        splits[s].push_back(members[static_cast<size_t>(perm[static_cast<size_t>(i)])]);
      prev = upto;
    }
  }
  for (auto& s : splits) std::sort(s.begin(), s.end());
  return splits;
}

}  // namespace

std::vector<std::vector<int64_t>> split_trials(int64_t trials,
                                               const std::vector<double>& fractions,
                                               const std::vector<int64_t>& labels,
                                               uint64_t seed) {
  return deal_stratified(trials, fractions, labels, seed);
}

std::vector<int> stratified_folds(int64_t trials, int64_t folds,
                                  const std::vector<int64_t>& labels, uint64_t seed) {
  if (folds < 2) fail(ErrorKind::config, "need at least 2 folds");
  const std::vector<double> fr(static_cast<size_t>(folds),
                               1.0 / static_cast<double>(folds));
  const auto splits = deal_stratified(trials, fr, labels, seed);
  std::vector<int> fold(static_cast<size_t>(trials), -1);
  for (size_t f = 0; f < splits.size(); ++f)
    for (const int64_t i : splits[f]) fold[static_cast<size_t>(i)] = static_cast<int>(f);
  return fold;
}

EventList import_event_list(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::io, "cannot open event list: " + path);
  EventList out;
  std::vector<std::tuple<int64_t, int64_t, double>> rows;
  std::string line;
  int64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream iss(line);
    int64_t trial, channel;
    double time;
    if (!(iss >> trial >> channel >> time))
      fail(ErrorKind::io, path + ":" + std::to_string(line_no) + ": malformed event line");
    std::string extra;
    if (iss >> extra)
      fail(ErrorKind::io, path + ":" + std::to_string(line_no) + ": trailing tokens");
    if (trial < 0 || channel < 0)
      fail(ErrorKind::io, path + ":" + std::to_string(line_no) + ": negative index");
    if (time < 0)
      fail(ErrorKind::io, path + ":" + std::to_string(line_no) + ": negative event time");
    rows.emplace_back(trial, channel, time);
    out.trials = std::max(out.trials, trial + 1);
    out.channels = std::max(out.channels, channel + 1);
  }
  if (rows.empty()) fail(ErrorKind::io, "event list is empty: " + path);
  out.events.assign(static_cast<size_t>(out.trials),
                    std::vector<std::vector<double>>(static_cast<size_t>(out.channels)));
  for (const auto& [k, n, t] : rows)
    out.events[static_cast<size_t>(k)][static_cast<size_t>(n)].push_back(t);
  return out;
}

}  // namespace ctae
