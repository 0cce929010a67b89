#include "evalkit/evalkit.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "common/errors.hpp"
#include "datasets/datasets.hpp"

namespace ctae {
namespace {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

constexpr double kAlphaGrid[] = {1e-4, 1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2};
constexpr double kDefaultAlpha = 1e-2;
constexpr double kScaleFloor = 1e-8;
constexpr int kMaxGdIters = 5000;

double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_sd(const std::vector<double>& v, double mean) {
  if (v.size() < 2) return 0.0;
  double acc = 0.0;
  for (const double x : v) acc += (x - mean) * (x - mean);
  return std::sqrt(acc / static_cast<double>(v.size() - 1));
}

void check_view(const FeatureView& f, const char* who) {
  if (f.values.shape.size() != 3)
    fail(ErrorKind::shape, std::string(who) + " expects features [K, dims, T], got " +
                               shape_str(f.values.shape));
  if (f.values.shape[0] < 1 || f.values.shape[1] < 1 || f.values.shape[2] < 1)
    fail(ErrorKind::shape, std::string(who) + ": empty feature view");
}

void check_folds(int64_t trials, int64_t folds, const char* who) {
  if (folds < 2) fail(ErrorKind::config, std::string(who) + " needs at least 2 folds");
  if (trials < 2 * folds)
    fail(ErrorKind::config, std::string(who) + " needs at least 2 trials per fold, got " +
                                std::to_string(trials) + " trials for " + std::to_string(folds) +
                                " folds");
}

Mat take_rows(const Mat& x, const std::vector<int64_t>& rows) {
  Mat out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(rows[i]);
  return out;
}

struct ColStats {
  Vec mean, scale;
  bool all_constant = false;
};

ColStats col_stats(const Mat& x) {
  ColStats st;
  const double n = static_cast<double>(x.rows());
  st.mean = x.colwise().mean();
  st.scale = Vec::Ones(x.cols());
  bool any_varying = false;
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const double var = (x.col(j).array() - st.mean(j)).square().sum() / n;
    const double sd = std::sqrt(var);
    if (sd > kScaleFloor) {
      st.scale(j) = 1.0 / sd;
      any_varying = true;
    }
  }
  st.all_constant = !any_varying;
  return st;
}

Mat standardized(const Mat& x, const ColStats& st) {
  return (x.rowwise() - st.mean.transpose()) * st.scale.asDiagonal();
}

// Ridge with the Gram normalized by the sample count, so the same alpha means
// the same shrinkage across folds of different sizes.
Mat ridge_solve(const Mat& xs, const Mat& yc, double alpha) {
  Mat gram = xs.transpose() * xs / static_cast<double>(xs.rows());
  gram.diagonal().array() += alpha;
  return gram.ldlt().solve(xs.transpose() * yc / static_cast<double>(xs.rows()));
}

struct RidgeModel {
  ColStats x;
  Vec y_mean;
  Mat w;
  double alpha = kDefaultAlpha;
  bool degenerate = false;

  Mat predict(const Mat& input) const {
    Mat out = standardized(input, x) * w;
    out.rowwise() += y_mean.transpose();
    return out;
  }
};

// `groups` assigns each training row to a unit that must stay on one side of
// any inner split (a trial); the regularization strength is picked by inner
// cross-validation over the alpha grid, smallest alpha winning ties.
RidgeModel fit_ridge(const Mat& x, const Mat& y, const std::vector<int64_t>& groups) {
  RidgeModel m;
  m.x = col_stats(x);
  m.y_mean = y.colwise().mean();
  if (m.x.all_constant) {
    m.degenerate = true;
    m.w = Mat::Zero(x.cols(), y.cols());
    return m;
  }
  const Mat xs = standardized(x, m.x);
  const Mat yc = y.rowwise() - m.y_mean.transpose();

  std::vector<int64_t> distinct;
  std::vector<int> fold_of_row(groups.size());
  for (size_t i = 0; i < groups.size(); ++i) {
    auto it = std::find(distinct.begin(), distinct.end(), groups[i]);
    if (it == distinct.end()) {
      distinct.push_back(groups[i]);
      it = std::prev(distinct.end());
    }
    fold_of_row[i] = static_cast<int>(it - distinct.begin());
  }
  const int nf = static_cast<int>(std::min<size_t>(5, distinct.size()));
  for (auto& f : fold_of_row) f %= nf;

  if (nf >= 2) {
    double best = std::numeric_limits<double>::infinity();
    for (const double alpha : kAlphaGrid) {
      double sse = 0.0;
      for (int f = 0; f < nf; ++f) {
        std::vector<int64_t> tr, va;
        for (size_t i = 0; i < fold_of_row.size(); ++i)
          (fold_of_row[i] == f ? va : tr).push_back(static_cast<int64_t>(i));
        if (tr.empty() || va.empty()) continue;
        const Mat wf = ridge_solve(take_rows(xs, tr), take_rows(yc, tr), alpha);
        sse += (take_rows(xs, va) * wf - take_rows(yc, va)).squaredNorm();
      }
      if (sse < best) {
        best = sse;
        m.alpha = alpha;
      }
    }
  }
  m.w = ridge_solve(xs, yc, m.alpha);
  return m;
}

// --- multinomial logistic regression -----------------------------------

double softmax_ce(const Mat& logits, const std::vector<int64_t>& y, Mat* probs) {
  const Eigen::Index n = logits.rows(), c = logits.cols();
  if (probs) probs->resize(n, c);
  double loss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mx = logits.row(i).maxCoeff();
    Eigen::RowVectorXd e = (logits.row(i).array() - mx).exp();
    const double s = e.sum();
    loss -= std::log(e(static_cast<Eigen::Index>(y[static_cast<size_t>(i)])) / s);
    if (probs) probs->row(i) = e / s;
  }
  return loss / static_cast<double>(n);
}

struct SoftmaxModel {
  ColStats x;
  Mat w;  // (p + 1) x C, last row is the intercept

  Mat logits_of(const Mat& input) const {
    const Mat xs = standardized(input, x);
    Mat out = xs * w.topRows(w.rows() - 1);
    out.rowwise() += w.row(w.rows() - 1);
    return out;
  }
};

std::vector<int64_t> argmax_rows(const Mat& logits) {
  std::vector<int64_t> out(static_cast<size_t>(logits.rows()));
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    Eigen::Index j = 0;
    logits.row(i).maxCoeff(&j);
    out[static_cast<size_t>(i)] = j;
  }
  return out;
}

// Full-batch gradient descent with a backtracking step, run until an accepted
// step improves the loss by less than 1e-6.
SoftmaxModel fit_softmax(const Mat& x, const std::vector<int64_t>& y, int64_t classes) {
  SoftmaxModel m;
  m.x = col_stats(x);
  const Eigen::Index n = x.rows(), p = x.cols();
  Mat xb(n, p + 1);
  xb << standardized(x, m.x), Vec::Ones(n);
  m.w = Mat::Zero(p + 1, classes);
  Mat onehot = Mat::Zero(n, classes);
  for (Eigen::Index i = 0; i < n; ++i)
    onehot(i, static_cast<Eigen::Index>(y[static_cast<size_t>(i)])) = 1.0;

  Mat probs;
  double loss = softmax_ce(xb * m.w, y, &probs);
  double lr = 1.0;
  for (int iter = 0; iter < kMaxGdIters; ++iter) {
    const Mat grad = xb.transpose() * (probs - onehot) / static_cast<double>(n);
    bool accepted = false;
    while (lr >= 1e-14) {
      const Mat cand = m.w - lr * grad;
      Mat cand_probs;
      const double cand_loss = softmax_ce(xb * cand, y, &cand_probs);
      if (cand_loss <= loss) {
        const double drop = loss - cand_loss;
        m.w = cand;
        probs = std::move(cand_probs);
        loss = cand_loss;
        lr = std::min(lr * 1.2, 1e6);
        accepted = true;
        if (drop < 1e-6) return m;
        break;
      }
      lr *= 0.5;
    }
    if (!accepted) break;
  }
  return m;
}

// Flatten [K, d, T] into [K, d*T] with column index dim * T + t.
Mat flatten_features(const DenseArray<double>& v) {
  const int64_t K = v.shape[0], d = v.shape[1], T = v.shape[2];
  Mat x(K, d * T);
  for (int64_t k = 0; k < K; ++k)
    for (int64_t i = 0; i < d * T; ++i)
      x(k, i) = v.data[static_cast<size_t>(k * d * T + i)];
  return x;
}

std::vector<int64_t> class_index(const std::vector<int64_t>& labels,
                                 std::vector<int64_t>& classes) {
  classes = labels;
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  std::vector<int64_t> idx(labels.size());
  for (size_t i = 0; i < labels.size(); ++i)
    idx[i] = std::lower_bound(classes.begin(), classes.end(), labels[i]) - classes.begin();
  return idx;
}

}  // namespace

// --- feature plumbing ---------------------------------------------------

std::pair<int64_t, int64_t> block_span(const MembershipMask& mask, const std::string& source) {
  if (source == "all") return {0, mask.dim};
  uint32_t code = 0;
  if (source == "shared") {
    code = (1u << mask.regions) - 1u;
  } else if (source.rfind("private:", 0) == 0) {
    const std::string tail = source.substr(8);
    int64_t r = -1;
    try {
      r = std::stoll(tail);
    } catch (...) {
      fail(ErrorKind::config, "bad region index in feature source '" + source + "'");
    }
    if (r < 0 || r >= mask.regions)
      fail(ErrorKind::config, "feature source '" + source + "' is out of range for " +
                                  std::to_string(mask.regions) + " regions");
    code = 1u << (mask.regions - 1 - r);
  } else if (source.rfind("block:", 0) == 0) {
    code = MembershipMask::parse_code(source.substr(6), mask.regions);
  } else {
    fail(ErrorKind::config, "unknown feature source '" + source +
                                "'; expected all, shared, private:<r>, or block:<code>");
  }
  const int b = mask.block_of_code(code);
  return {mask.block_offsets[static_cast<size_t>(b)], mask.block_sizes[static_cast<size_t>(b)]};
}

FeatureView features_from_latents(const DenseArray<double>& latents, const MembershipMask& mask,
                                  const std::string& source) {
  if (latents.shape.size() != 3 || latents.shape[2] != mask.dim)
    fail(ErrorKind::shape, "features_from_latents expects latents [K,T," +
                               std::to_string(mask.dim) + "], got " + shape_str(latents.shape));
  const auto [off, size] = block_span(mask, source);
  if (size < 1) fail(ErrorKind::config, "feature source '" + source + "' selects an empty block");
  const int64_t K = latents.shape[0], T = latents.shape[1], D = mask.dim;
  FeatureView f;
  f.source = source;
  f.values = DenseArray<double>::zeros({K, size, T});
  for (int64_t k = 0; k < K; ++k)
    for (int64_t t = 0; t < T; ++t)
      for (int64_t d = 0; d < size; ++d)
        f.values.data[static_cast<size_t>((k * size + d) * T + t)] =
            latents.data[static_cast<size_t>((k * T + t) * D + off + d)];
  return f;
}

FeatureView extract_features(CtaeModel<double>& model,
                             const std::vector<DenseArray<double>>& inputs,
                             const std::string& source, int64_t chunk) {
  const auto lat = model.infer_latents(inputs, chunk);
  return features_from_latents(lat.fused, model.mask(), source);
}

DenseArray<double> slice_rows(const DenseArray<double>& kdt, int64_t offset, int64_t size) {
  if (kdt.shape.size() != 3)
    fail(ErrorKind::shape, "slice_rows expects [K, d, T], got " + shape_str(kdt.shape));
  const int64_t K = kdt.shape[0], d = kdt.shape[1], T = kdt.shape[2];
  if (offset < 0 || size < 0 || offset + size > d)
    fail(ErrorKind::shape, "row slice [" + std::to_string(offset) + ", " +
                               std::to_string(offset + size) + ") exceeds " + std::to_string(d) +
                               " rows");
  DenseArray<double> out = DenseArray<double>::zeros({K, size, T});
  for (int64_t k = 0; k < K; ++k)
    std::copy_n(kdt.data.data() + (k * d + offset) * T, size * T,
                out.data.data() + k * size * T);
  return out;
}

FeatureView time_window(const FeatureView& view, int64_t t0, int64_t t1) {
  check_view(view, "time_window");
  const int64_t K = view.values.shape[0], d = view.values.shape[1], T = view.values.shape[2];
  if (t0 < 0 || t1 > T || t0 >= t1)
    fail(ErrorKind::config, "time window [" + std::to_string(t0) + ", " + std::to_string(t1) +
                                ") is invalid for " + std::to_string(T) + " bins");
  FeatureView out;
  out.source = view.source;
  out.values = DenseArray<double>::zeros({K, d, t1 - t0});
  for (int64_t k = 0; k < K; ++k)
    for (int64_t i = 0; i < d; ++i)
      std::copy_n(view.values.data.data() + (k * d + i) * T + t0, t1 - t0,
                  out.values.data.data() + (k * d + i) * (t1 - t0));
  return out;
}

// --- decoders ------------------------------------------------------------

DecodeReport fit_linear_decoder(const FeatureView& features, const DenseArray<double>& targets,
                                int64_t folds) {
  check_view(features, "fit_linear_decoder");
  const int64_t K = features.values.shape[0], d = features.values.shape[1],
                T = features.values.shape[2];
  if (targets.shape.size() != 3 || targets.shape[0] != K || targets.shape[2] != T)
    fail(ErrorKind::shape, "targets must be [K, q, " + std::to_string(T) + "] matching " +
                               std::to_string(K) + " trials, got " + shape_str(targets.shape));
  const int64_t q = targets.shape[1];
  check_folds(K, folds, "fit_linear_decoder");

  DecodeReport rep;
  rep.task = "continuous";
  rep.predictions = DenseArray<double>::zeros({K, q, T});
  rep.coef_digest.assign(static_cast<size_t>(d), 0.0);
  double digest_count = 0.0;

  for (int64_t fold = 0; fold < folds; ++fold) {
    std::vector<int64_t> train, test;
    for (int64_t k = 0; k < K; ++k) (k % folds == fold ? test : train).push_back(k);

    double ss_res = 0.0, ss_tot = 0.0;
    bool informative = false;
    for (int64_t t = 0; t < T; ++t) {
      Mat x(static_cast<Eigen::Index>(train.size()), d), y(static_cast<Eigen::Index>(train.size()), q);
      for (size_t i = 0; i < train.size(); ++i) {
        for (int64_t j = 0; j < d; ++j)
          x(static_cast<Eigen::Index>(i), j) =
              features.values.data[static_cast<size_t>((train[i] * d + j) * T + t)];
        for (int64_t j = 0; j < q; ++j)
          y(static_cast<Eigen::Index>(i), j) =
              targets.data[static_cast<size_t>((train[i] * q + j) * T + t)];
      }
      std::vector<int64_t> groups(train.size());
      std::iota(groups.begin(), groups.end(), 0);
      const RidgeModel m = fit_ridge(x, y, groups);
      if (m.degenerate)
        rep.degenerate = true;
      else
        informative = true;

      Mat xt(static_cast<Eigen::Index>(test.size()), d), yt(static_cast<Eigen::Index>(test.size()), q);
      for (size_t i = 0; i < test.size(); ++i) {
        for (int64_t j = 0; j < d; ++j)
          xt(static_cast<Eigen::Index>(i), j) =
              features.values.data[static_cast<size_t>((test[i] * d + j) * T + t)];
        for (int64_t j = 0; j < q; ++j)
          yt(static_cast<Eigen::Index>(i), j) =
              targets.data[static_cast<size_t>((test[i] * q + j) * T + t)];
      }
      const Mat pred = m.predict(xt);
      for (size_t i = 0; i < test.size(); ++i)
        for (int64_t j = 0; j < q; ++j)
          rep.predictions.data[static_cast<size_t>((test[i] * q + j) * T + t)] =
              pred(static_cast<Eigen::Index>(i), j);

      const Eigen::RowVectorXd mu = yt.colwise().mean();
      ss_res += (pred - yt).squaredNorm();
      ss_tot += (yt.rowwise() - mu).squaredNorm();

      for (int64_t j = 0; j < d; ++j)
        rep.coef_digest[static_cast<size_t>(j)] += m.w.row(j).cwiseAbs().sum();
      digest_count += static_cast<double>(q);
    }

    double score = 0.0;
    if (!informative || ss_tot <= 0.0)
      rep.degenerate = true;
    else
      score = 1.0 - ss_res / ss_tot;
    rep.fold_scores.push_back(score);
  }

  if (digest_count > 0)
    for (auto& v : rep.coef_digest) v /= digest_count;
  rep.mean = mean_of(rep.fold_scores);
  rep.sd = sample_sd(rep.fold_scores, rep.mean);
  return rep;
}

DecodeReport fit_logistic_decoder(const FeatureView& features, const std::vector<int64_t>& labels,
                                  int64_t folds, uint64_t seed) {
  check_view(features, "fit_logistic_decoder");
  const int64_t K = features.values.shape[0], d = features.values.shape[1],
                T = features.values.shape[2];
  if (static_cast<int64_t>(labels.size()) != K)
    fail(ErrorKind::shape, "need one label per trial: " + std::to_string(labels.size()) +
                               " labels for " + std::to_string(K) + " trials");
  check_folds(K, folds, "fit_logistic_decoder");

  std::vector<int64_t> classes;
  const std::vector<int64_t> y = class_index(labels, classes);
  const int64_t C = static_cast<int64_t>(classes.size());
  if (C < 2) fail(ErrorKind::config, "classification needs at least 2 classes");

  const std::vector<int> fold_of = stratified_folds(K, folds, labels, seed);
  const Mat x = flatten_features(features.values);

  DecodeReport rep;
  rep.task = "discrete";
  rep.classes = classes;
  rep.predicted.assign(static_cast<size_t>(K), 0);
  rep.coef_digest.assign(static_cast<size_t>(d), 0.0);
  Mat counts = Mat::Zero(C, C);
  int64_t correct_total = 0;

  for (int64_t fold = 0; fold < folds; ++fold) {
    std::vector<int64_t> train, test;
    for (int64_t k = 0; k < K; ++k) (fold_of[static_cast<size_t>(k)] == fold ? test : train).push_back(k);
    std::vector<int64_t> y_train;
    for (const int64_t k : train) y_train.push_back(y[static_cast<size_t>(k)]);

    const SoftmaxModel m = fit_softmax(take_rows(x, train), y_train, C);
    const std::vector<int64_t> pred = argmax_rows(m.logits_of(take_rows(x, test)));
    int64_t correct = 0;
    for (size_t i = 0; i < test.size(); ++i) {
      const int64_t truth = y[static_cast<size_t>(test[i])];
      counts(truth, pred[i]) += 1.0;
      rep.predicted[static_cast<size_t>(test[i])] = classes[static_cast<size_t>(pred[i])];
      if (pred[i] == truth) ++correct;
    }
    correct_total += correct;
    rep.fold_scores.push_back(static_cast<double>(correct) / static_cast<double>(test.size()));

    for (int64_t j = 0; j < d; ++j)
      for (int64_t t = 0; t < T; ++t)
        rep.coef_digest[static_cast<size_t>(j)] += m.w.row(j * T + t).cwiseAbs().sum();
  }

  for (auto& v : rep.coef_digest) v /= static_cast<double>(folds * T * C);
  rep.accuracy = static_cast<double>(correct_total) / static_cast<double>(K);
  rep.confusion = DenseArray<double>::zeros({C, C});
  for (int64_t i = 0; i < C; ++i) {
    const double row = counts.row(i).sum();
    for (int64_t j = 0; j < C; ++j)
      rep.confusion.data[static_cast<size_t>(i * C + j)] = row > 0 ? counts(i, j) / row : 0.0;
  }
  rep.mean = mean_of(rep.fold_scores);
  rep.sd = sample_sd(rep.fold_scores, rep.mean);
  return rep;
}

TimeCurve time_resolved_decoding(const FeatureView& features, const std::vector<int64_t>& labels,
                                 int64_t window, int64_t folds, uint64_t seed) {
  check_view(features, "time_resolved_decoding");
  const int64_t K = features.values.shape[0], d = features.values.shape[1],
                T = features.values.shape[2];
  if (window < 1 || window % 2 == 0)
    fail(ErrorKind::config, "window must be odd and positive, got " + std::to_string(window));
  if (window > T)
    fail(ErrorKind::config, "window " + std::to_string(window) + " exceeds " + std::to_string(T) +
                                " time bins");
  if (static_cast<int64_t>(labels.size()) != K)
    fail(ErrorKind::shape, "need one label per trial: " + std::to_string(labels.size()) +
                               " labels for " + std::to_string(K) + " trials");
  check_folds(K, folds, "time_resolved_decoding");

  std::vector<int64_t> classes;
  const std::vector<int64_t> y = class_index(labels, classes);
  const int64_t C = static_cast<int64_t>(classes.size());
  if (C < 2) fail(ErrorKind::config, "classification needs at least 2 classes");

  const std::vector<int> fold_of = stratified_folds(K, folds, labels, seed);
  const Mat x = flatten_features(features.values);
  const int64_t half = window / 2;

  TimeCurve curve;
  curve.accuracy.assign(static_cast<size_t>(T), 0.0);
  curve.sd.assign(static_cast<size_t>(T), 0.0);
  curve.truncated.assign(static_cast<size_t>(T), 0);
  for (int64_t c = 0; c < T; ++c)
    curve.truncated[static_cast<size_t>(c)] = (c - half < 0 || c + half >= T) ? 1 : 0;

  Mat correct_bin = Mat::Zero(T, folds);
  std::vector<double> fold_n(static_cast<size_t>(folds), 0.0);
  int64_t full_correct = 0;

  for (int64_t fold = 0; fold < folds; ++fold) {
    std::vector<int64_t> train, test;
    for (int64_t k = 0; k < K; ++k) (fold_of[static_cast<size_t>(k)] == fold ? test : train).push_back(k);
    std::vector<int64_t> y_train;
    for (const int64_t k : train) y_train.push_back(y[static_cast<size_t>(k)]);
    fold_n[static_cast<size_t>(fold)] = static_cast<double>(test.size());

    const SoftmaxModel m = fit_softmax(take_rows(x, train), y_train, C);
    const Mat xs_test = standardized(take_rows(x, test), m.x);
    const Mat w_feat = m.w.topRows(m.w.rows() - 1);
    const Eigen::RowVectorXd bias = m.w.row(m.w.rows() - 1);

    {  // unmasked reference
      Mat logits = xs_test * w_feat;
      logits.rowwise() += bias;
      const auto pred = argmax_rows(logits);
      for (size_t i = 0; i < test.size(); ++i)
        if (pred[i] == y[static_cast<size_t>(test[i])]) ++full_correct;
    }

    for (int64_t c = 0; c < T; ++c) {
      // keep `window` bins, sliding inward at the edges; training-mean
      // imputation outside is exactly zero in standardized coordinates
      const int64_t start = std::clamp(c - half, int64_t{0}, T - window);
      Mat masked = Mat::Zero(xs_test.rows(), xs_test.cols());
      for (int64_t j = 0; j < d; ++j)
        masked.middleCols(j * T + start, window) = xs_test.middleCols(j * T + start, window);
      Mat logits = masked * w_feat;
      logits.rowwise() += bias;
      const auto pred = argmax_rows(logits);
      for (size_t i = 0; i < test.size(); ++i)
        if (pred[i] == y[static_cast<size_t>(test[i])]) correct_bin(c, fold) += 1.0;
    }
  }

  curve.full_accuracy = static_cast<double>(full_correct) / static_cast<double>(K);
  for (int64_t c = 0; c < T; ++c) {
    curve.accuracy[static_cast<size_t>(c)] = correct_bin.row(c).sum() / static_cast<double>(K);
    std::vector<double> per_fold;
    for (int64_t f = 0; f < folds; ++f)
      per_fold.push_back(correct_bin(c, f) / fold_n[static_cast<size_t>(f)]);
    curve.sd[static_cast<size_t>(c)] = sample_sd(per_fold, mean_of(per_fold));
  }
  return curve;
}

// --- diagnostics ----------------------------------------------------------

GramDiagnostics gram_diagnostics(const DenseArray<double>& latents, const MembershipMask& mask) {
  if (latents.shape.size() != 3 || latents.shape[2] != mask.dim)
    fail(ErrorKind::shape, "gram_diagnostics expects latents [K,T," + std::to_string(mask.dim) +
                               "], got " + shape_str(latents.shape));
  const int64_t K = latents.shape[0], T = latents.shape[1], D = mask.dim;
  const int64_t B = static_cast<int64_t>(mask.codes.size());

  Mat acc = Mat::Zero(D, D), valid = Mat::Zero(D, D);
  std::vector<int64_t> nonzero_trials(static_cast<size_t>(D), 0);
  Mat rows(D, T);
  for (int64_t k = 0; k < K; ++k) {
    for (int64_t i = 0; i < D; ++i)
      for (int64_t t = 0; t < T; ++t)
        rows(i, t) = latents.data[static_cast<size_t>((k * T + t) * D + i)];
    const Vec norms = rows.rowwise().norm();
    for (int64_t i = 0; i < D; ++i)
      if (norms(i) > 1e-12) ++nonzero_trials[static_cast<size_t>(i)];
    for (int64_t i = 0; i < D; ++i) {
      if (norms(i) <= 1e-12) continue;
      for (int64_t j = i; j < D; ++j) {
        if (norms(j) <= 1e-12) continue;
        const double cos = std::abs(rows.row(i).dot(rows.row(j))) / (norms(i) * norms(j));
        acc(i, j) += cos;
        valid(i, j) += 1.0;
      }
    }
  }

  GramDiagnostics g;
  g.mean_abs = DenseArray<double>::zeros({D, D});
  for (int64_t i = 0; i < D; ++i) {
    if (nonzero_trials[static_cast<size_t>(i)] == 0) g.collapsed.push_back(i);
    for (int64_t j = i; j < D; ++j) {
      const double v = valid(i, j) > 0 ? acc(i, j) / valid(i, j) : 0.0;
      g.mean_abs.data[static_cast<size_t>(i * D + j)] = v;
      g.mean_abs.data[static_cast<size_t>(j * D + i)] = v;
    }
  }

  double off_sum = 0.0;
  int64_t off_n = 0;
  for (int64_t i = 0; i < D; ++i)
    for (int64_t j = i + 1; j < D; ++j)
      if (valid(i, j) > 0) {
        off_sum += g.mean_abs.data[static_cast<size_t>(i * D + j)];
        ++off_n;
      }
  g.off_diagonal_mean = off_n > 0 ? off_sum / static_cast<double>(off_n) : 0.0;

  auto block_of_dim = [&](int64_t dim) {
    for (int64_t b = B - 1; b >= 0; --b)
      if (dim >= mask.block_offsets[static_cast<size_t>(b)] &&
          dim < mask.block_offsets[static_cast<size_t>(b)] + mask.block_sizes[static_cast<size_t>(b)])
        return b;
    return int64_t{0};
  };
  Mat bp_sum = Mat::Zero(B, B), bp_n = Mat::Zero(B, B);
  for (int64_t i = 0; i < D; ++i)
    for (int64_t j = i + 1; j < D; ++j) {
      if (valid(i, j) <= 0) continue;
      const int64_t a = block_of_dim(i), b = block_of_dim(j);
      const double v = g.mean_abs.data[static_cast<size_t>(i * D + j)];
      bp_sum(a, b) += v;
      bp_n(a, b) += 1.0;
      if (a != b) {
        bp_sum(b, a) += v;
        bp_n(b, a) += 1.0;
      }
    }
  g.block_pairs = DenseArray<double>::zeros({B, B});
  for (int64_t a = 0; a < B; ++a)
    for (int64_t b = 0; b < B; ++b)
      g.block_pairs.data[static_cast<size_t>(a * B + b)] =
          bp_n(a, b) > 0 ? bp_sum(a, b) / bp_n(a, b) : 0.0;
  return g;
}

AlignmentDiagnostics alignment_diagnostics(const LatentValues<double>& lat,
                                           const MembershipMask& mask) {
  const int64_t R = mask.regions;
  if (static_cast<int64_t>(lat.z.size()) != R)
    fail(ErrorKind::shape, "alignment needs one latent set per region");
  const uint32_t full = (1u << R) - 1u;
  const int b = mask.block_of_code(full);
  const int64_t off = mask.block_offsets[static_cast<size_t>(b)];
  const int64_t ds = mask.block_sizes[static_cast<size_t>(b)];
  if (ds < 1) fail(ErrorKind::config, "mask has no shared dimensions to align");
  const int64_t K = lat.fused.shape[0], T = lat.fused.shape[1], D = mask.dim;

  AlignmentDiagnostics a;
  a.per_region = DenseArray<double>::zeros({R, ds});
  a.region_traces = DenseArray<double>::zeros({R, ds, T});
  a.fused_trace = DenseArray<double>::zeros({ds, T});

  for (int64_t k = 0; k < K; ++k)
    for (int64_t t = 0; t < T; ++t)
      for (int64_t d = 0; d < ds; ++d)
        a.fused_trace.data[static_cast<size_t>(d * T + t)] +=
            lat.fused.data[static_cast<size_t>((k * T + t) * D + off + d)];
  for (auto& v : a.fused_trace.data) v /= static_cast<double>(K);

  for (int64_t r = 0; r < R; ++r) {
    const auto& z = lat.z[static_cast<size_t>(r)];
    for (int64_t k = 0; k < K; ++k)
      for (int64_t t = 0; t < T; ++t)
        for (int64_t d = 0; d < ds; ++d) {
          const double zr = z.data[static_cast<size_t>((k * T + t) * D + off + d)];
          const double zf = lat.fused.data[static_cast<size_t>((k * T + t) * D + off + d)];
          a.per_region.data[static_cast<size_t>(r * ds + d)] += (zr - zf) * (zr - zf);
          a.region_traces.data[static_cast<size_t>((r * ds + d) * T + t)] += zr;
        }
    for (int64_t d = 0; d < ds; ++d)
      a.per_region.data[static_cast<size_t>(r * ds + d)] /= static_cast<double>(K * T);
    for (int64_t i = 0; i < ds * T; ++i)
      a.region_traces.data[static_cast<size_t>(r * ds * T + i)] /= static_cast<double>(K);
  }

  for (const double v : a.per_region.data) a.overall += v;
  a.overall /= static_cast<double>(R * ds);
  return a;
}

RecoveryReport subspace_recovery(const DenseArray<double>& recovered,
                                 const DenseArray<double>& planted, int64_t folds) {
  if (recovered.shape.size() != 3 || planted.shape.size() != 3)
    fail(ErrorKind::shape, "subspace_recovery expects [K, d, T] arrays");
  const int64_t K = recovered.shape[0], dr = recovered.shape[1], T = recovered.shape[2];
  if (planted.shape[0] != K || planted.shape[2] != T)
    fail(ErrorKind::shape, "recovered " + shape_str(recovered.shape) + " and planted " +
                               shape_str(planted.shape) + " do not match");
  const int64_t dp = planted.shape[1];
  check_folds(K, folds, "subspace_recovery");

  RecoveryReport rep;
  for (int64_t fold = 0; fold < folds; ++fold) {
    std::vector<int64_t> train, test;
    for (int64_t k = 0; k < K; ++k) (k % folds == fold ? test : train).push_back(k);

    const auto stack = [&](const DenseArray<double>& src, int64_t dim,
                           const std::vector<int64_t>& ids) {
      Mat out(static_cast<Eigen::Index>(ids.size()) * T, dim);
      for (size_t i = 0; i < ids.size(); ++i)
        for (int64_t t = 0; t < T; ++t)
          for (int64_t j = 0; j < dim; ++j)
            out(static_cast<Eigen::Index>(i) * T + t, j) =
                src.data[static_cast<size_t>((ids[i] * dim + j) * T + t)];
      return out;
    };
    const Mat x = stack(recovered, dr, train), y = stack(planted, dp, train);
    std::vector<int64_t> groups(static_cast<size_t>(train.size()) * static_cast<size_t>(T));
    for (size_t i = 0; i < train.size(); ++i)
      for (int64_t t = 0; t < T; ++t) groups[i * static_cast<size_t>(T) + static_cast<size_t>(t)] = static_cast<int64_t>(i);

    const RidgeModel m = fit_ridge(x, y, groups);
    if (m.degenerate) {
      rep.degenerate = true;
      rep.fold_r2.push_back(0.0);
      continue;
    }
    const Mat xt = stack(recovered, dr, test), yt = stack(planted, dp, test);
    const Mat pred = m.predict(xt);
    const Eigen::RowVectorXd mu = yt.colwise().mean();
    const double ss_res = (pred - yt).squaredNorm();
    const double ss_tot = (yt.rowwise() - mu).squaredNorm();
    if (ss_tot <= 0.0) {
      rep.degenerate = true;
      rep.fold_r2.push_back(0.0);
    } else {
      rep.fold_r2.push_back(1.0 - ss_res / ss_tot);
    }
  }
  rep.r2 = mean_of(rep.fold_r2);
  return rep;
}

VarianceReport variance_per_latent(const DenseArray<double>& latents) {
  if (latents.shape.size() != 3)
    fail(ErrorKind::shape, "variance_per_latent expects latents [K, T, D], got " +
                               shape_str(latents.shape));
  const int64_t K = latents.shape[0], T = latents.shape[1], D = latents.shape[2];
  VarianceReport rep;
  rep.per_dim.assign(static_cast<size_t>(D), 0.0);
  const double n = static_cast<double>(K * T);
  for (int64_t d = 0; d < D; ++d) {
    double mean = 0.0;
    for (int64_t k = 0; k < K; ++k)
      for (int64_t t = 0; t < T; ++t)
        mean += latents.data[static_cast<size_t>((k * T + t) * D + d)];
    mean /= n;
    double var = 0.0;
    for (int64_t k = 0; k < K; ++k)
      for (int64_t t = 0; t < T; ++t) {
        const double v = latents.data[static_cast<size_t>((k * T + t) * D + d)] - mean;
        var += v * v;
      }
    rep.per_dim[static_cast<size_t>(d)] = var / n;
  }
  const double total = std::accumulate(rep.per_dim.begin(), rep.per_dim.end(), 0.0);
  rep.fractions = rep.per_dim;
  if (total > 0)
    for (auto& v : rep.fractions) v /= total;
  else
    std::fill(rep.fractions.begin(), rep.fractions.end(), 0.0);
  std::sort(rep.fractions.begin(), rep.fractions.end(), std::greater<>());
  for (const double v : rep.fractions)
    if (v > 0.01) ++rep.d_eff;
  return rep;
}

}  // namespace ctae
