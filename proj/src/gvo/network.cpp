#include "nf/gvo/network.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "nf/nn/checkpoint.hpp"

namespace nf::gvo {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Row-wise max; ties keep the lowest column.
VectorXd row_max(const MatrixXd& a, std::vector<Index>& argmax) {
  VectorXd out(a.rows());
  argmax.assign(static_cast<std::size_t>(a.rows()), 0);
  for (Index r = 0; r < a.rows(); ++r) {
    double best = a(r, 0);
    Index at = 0;
    for (Index c = 1; c < a.cols(); ++c) {
      if (a(r, c) > best) {
        best = a(r, c);
        at = c;
      }
    }
    out[r] = best;
    argmax[static_cast<std::size_t>(r)] = at;
  }
  return out;
}

MatrixXd scatter_max(const VectorXd& d, const std::vector<Index>& argmax, Index cols) {
  MatrixXd out = MatrixXd::Zero(d.size(), cols);
  for (Index r = 0; r < d.size(); ++r) out(r, argmax[static_cast<std::size_t>(r)]) = d[r];
  return out;
}

}  // namespace

std::vector<int> GvoShape::neighbor_schedule() const {
  std::vector<int> s{m};
  for (std::size_t l = 0; l < kernel_widths.size(); ++l) s.push_back(std::max(1, s.back() / 2));
  return s;
}

void GvoShape::validate() const {
  if (m < 2) throw InvalidArgument("patch size m must be >= 2");
  if (kernel_widths.empty()) throw InvalidArgument("need at least one kernel layer");
  for (int w : kernel_widths)
    if (w < 1) throw InvalidArgument("kernel widths must be positive");
  if (score_hidden < 1) throw InvalidArgument("score head width must be positive");
  if (angle_hidden.empty()) throw InvalidArgument("angle head needs a hidden layer");
  for (int w : angle_hidden)
    if (w < 1) throw InvalidArgument("angle head widths must be positive");
}

VectorXd KernelLayer::pooled(const MatrixXd& features, const VectorXd& distances,
                             bool use_weight, Cache* cache) const {
  const Index n = features.cols();
  if (distances.size() != n) throw InvalidArgument("kernel layer: distances/features mismatch");
  if (features.rows() != alpha.input_dim()) throw InvalidArgument("kernel layer: feature width mismatch");
  VectorXd d, w;
  double sum = 0.0;
  if (use_weight) {
    d.resize(n);
    for (Index i = 0; i < n; ++i) d[i] = sigmoid(theta[0] - theta[1] * distances[i]);
    std::vector<double> sorted(d.data(), d.data() + n);
    std::sort(sorted.begin(), sorted.end());
    for (double v : sorted) sum += v;
    w = d / sum;
  } else {
    w = VectorXd::Constant(n, 1.0 / static_cast<double>(n));
  }
  const VectorXd scale = use_weight ? VectorXd(static_cast<double>(n) * w) : VectorXd::Ones(n);
  const MatrixXd u = features * scale.asDiagonal();
  const MatrixXd a = alpha.forward(u, cache ? &cache->alpha : nullptr);
  std::vector<Index> argmax;
  const MatrixXd p = row_max(a, argmax);
  VectorXd b = beta.forward(p, cache ? &cache->beta : nullptr);
  if (cache) {
    cache->input = features;
    cache->distances = distances;
    cache->d = std::move(d);
    cache->w = std::move(w);
    cache->d_sum = sum;
    cache->argmax = std::move(argmax);
    cache->pooled_in = p;
  }
  return b;
}

MatrixXd KernelLayer::forward(const MatrixXd& features, const VectorXd& distances, int keep,
                              bool use_weight, Cache* cache) const {
  if (keep < 1 || keep > features.cols()) throw InvalidArgument("kernel layer: bad retained count");
  const VectorXd b = pooled(features, distances, use_weight, cache);
  MatrixXd in(features.rows() + b.size(), keep);
  in.topRows(features.rows()) = features.leftCols(keep);
  in.bottomRows(b.size()) = b.replicate(1, keep);
  return gamma.forward(in, cache ? &cache->gamma : nullptr);
}

MatrixXd KernelLayer::backward(const Cache& cache, const MatrixXd& dout, bool use_weight,
                               KernelLayer& grads) const {
  const MatrixXd& f = cache.input;
  const Index n = f.cols();
  const Index c_in = f.rows();
  const MatrixXd dg = gamma.backward(cache.gamma, dout, grads.gamma);
  MatrixXd df = MatrixXd::Zero(c_in, n);
  df.leftCols(dout.cols()) = dg.topRows(c_in);
  const MatrixXd db = dg.bottomRows(dg.rows() - c_in).rowwise().sum();
  const VectorXd dp = beta.backward(cache.beta, db, grads.beta);
  const MatrixXd da = scatter_max(dp, cache.argmax, n);
  const MatrixXd du = alpha.backward(cache.alpha, da, grads.alpha);
  const VectorXd scale = use_weight ? VectorXd(static_cast<double>(n) * cache.w) : VectorXd::Ones(n);
  df += du * scale.asDiagonal();
  if (use_weight) {
    const VectorXd dw = static_cast<double>(n) * du.cwiseProduct(f).colwise().sum().transpose();
    const double wdot = dw.dot(cache.w);
    double g1 = 0.0, g2 = 0.0;
    for (Index i = 0; i < n; ++i) {
      const double dd = (dw[i] - wdot) / cache.d_sum;
      const double ds = dd * cache.d[i] * (1.0 - cache.d[i]);
      g1 += ds;
      g2 -= ds * cache.distances[i];
    }
    grads.theta[0] += g1;
    grads.theta[1] += g2;
  }
  return df;
}

GvoNetwork::GvoNetwork(const GvoShape& shape) : shape_(shape) {
  shape.validate();
  int c_in = 3;
  for (int c : shape.kernel_widths) {
    KernelLayer layer;
    layer.alpha = nn::Perceptron({c_in, c, c}, true);
    layer.beta = nn::Perceptron({c, c}, true);
    layer.gamma = nn::Perceptron({c_in + c, c}, true);
    layers_.push_back(std::move(layer));
    c_in = c;
  }
  score_ = nn::Perceptron({c_in, shape.score_hidden, 1}, false);
  const int h1 = shape.angle_hidden.front();
  angle_first_ = {MatrixXd::Zero(h1, c_in + 3), VectorXd::Zero(h1)};
  std::vector<int> rest(shape.angle_hidden.begin(), shape.angle_hidden.end());
  rest.push_back(1);
  angle_rest_ = nn::Perceptron(rest, false);
}

void GvoNetwork::init_he(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (auto& layer : layers_) {
    layer.alpha.init_he(rng);
    layer.beta.init_he(rng);
    layer.gamma.init_he(rng);
    layer.theta.setOnes();
  }
  score_.init_he(rng);
  std::normal_distribution<double> g(0.0, std::sqrt(2.0 / double(angle_first_.weight.cols())));
  for (Index i = 0; i < angle_first_.weight.size(); ++i) angle_first_.weight.data()[i] = g(rng);
  angle_first_.bias.setZero();
  angle_rest_.init_he(rng);
}

PatchEncoding GvoNetwork::encode(const NeighborPatch& patch, Cache* cache) const {
  if (patch.size() < 1) throw InvalidArgument("empty patch");
  if (cache) cache->layers.resize(layers_.size());
  MatrixXd f = patch.coords;
  Index n = f.cols();
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const Index keep = std::max<Index>(1, n / 2);
    f = layers_[l].forward(f, patch.distances.head(n), static_cast<int>(keep), shape_.use_kernel_weight,
                           cache ? &cache->layers[l] : nullptr);
    n = keep;
  }
  PatchEncoding enc;
  const MatrixXd z = score_.forward(f, cache ? &cache->score : nullptr);
  enc.scores.resize(n);
  for (Index j = 0; j < n; ++j) enc.scores[j] = sigmoid(z(0, j));
  MatrixXd gated = shape_.use_score ? MatrixXd(f * enc.scores.asDiagonal()) : f;
  std::vector<Index> argmax;
  enc.pooled = row_max(gated, argmax);
  enc.features = std::move(f);
  if (cache) {
    cache->gated = std::move(gated);
    cache->argmax = std::move(argmax);
  }
  return enc;
}

Eigen::RowVectorXd GvoNetwork::predict_angles(const VectorXd& pooled,
                                              const Eigen::Matrix3Xd& candidates,
                                              AngleCache* cache) const {
  const Index c = pooled.size();
  if (c + 3 != angle_first_.weight.cols()) throw InvalidArgument("angle head: pooled width mismatch");
  const VectorXd base = angle_first_.weight.leftCols(c) * pooled + angle_first_.bias;
  MatrixXd z1 = angle_first_.weight.rightCols(3) * candidates;
  z1.colwise() += base;
  const MatrixXd out = angle_rest_.forward(z1.cwiseMax(0.0), cache ? &cache->rest : nullptr);
  Eigen::RowVectorXd squashed(out.cols());
  for (Index i = 0; i < out.cols(); ++i) squashed[i] = sigmoid(out(0, i));
  if (cache) {
    cache->candidates = candidates;
    cache->z1 = std::move(z1);
    cache->squashed = squashed;
  }
  return std::numbers::pi * squashed;
}

VectorXd GvoNetwork::backward_angles(const VectorXd& pooled, const AngleCache& cache,
                                     const Eigen::RowVectorXd& dangles, GvoNetwork& grads) const {
  const Index c = pooled.size();
  const Eigen::RowVectorXd dout =
      std::numbers::pi * dangles.cwiseProduct(cache.squashed.cwiseProduct(
                             (1.0 - cache.squashed.array()).matrix()));
  MatrixXd dz1 = angle_rest_.backward(cache.rest, dout, grads.angle_rest_);
  dz1 = dz1.cwiseProduct((cache.z1.array() > 0.0).cast<double>().matrix());
  const VectorXd rs = dz1.rowwise().sum();
  grads.angle_first_.weight.leftCols(c).noalias() += rs * pooled.transpose();
  grads.angle_first_.weight.rightCols(3).noalias() += dz1 * cache.candidates.transpose();
  grads.angle_first_.bias += rs;
  return angle_first_.weight.leftCols(c).transpose() * rs;
}

void GvoNetwork::backward_encoding(const Cache& cache, const PatchEncoding& enc,
                                   const VectorXd& dscores, const VectorXd& dpooled,
                                   GvoNetwork& grads) const {
  const Index n = enc.features.cols();
  const MatrixXd dgated = scatter_max(dpooled, cache.argmax, n);
  MatrixXd dh;
  VectorXd ds = dscores;
  if (shape_.use_score) {
    dh = dgated * enc.scores.asDiagonal();
    ds += dgated.cwiseProduct(enc.features).colwise().sum().transpose();
  } else {
    dh = dgated;
  }
  if (ds.size() == n && !ds.isZero(0.0)) {
    Eigen::RowVectorXd dz(n);
    for (Index j = 0; j < n; ++j) dz[j] = ds[j] * enc.scores[j] * (1.0 - enc.scores[j]);
    dh += score_.backward(cache.score, dz, grads.score_);
  }
  for (std::size_t l = layers_.size(); l-- > 0;) {
    dh = layers_[l].backward(cache.layers[l], dh, shape_.use_kernel_weight, grads.layers_[l]);
  }
}

GvoNetwork GvoNetwork::zeros_like() const {
  GvoNetwork g;
  g.shape_ = shape_;
  for (const auto& layer : layers_) {
    KernelLayer z;
    z.alpha = layer.alpha.zeros_like();
    z.beta = layer.beta.zeros_like();
    z.gamma = layer.gamma.zeros_like();
    z.theta = VectorXd::Zero(2);
    g.layers_.push_back(std::move(z));
  }
  g.score_ = score_.zeros_like();
  g.angle_first_ = {MatrixXd::Zero(angle_first_.weight.rows(), angle_first_.weight.cols()),
                    VectorXd::Zero(angle_first_.bias.size())};
  g.angle_rest_ = angle_rest_.zeros_like();
  return g;
}

nn::ParamBlocks GvoNetwork::parameters() {
  nn::ParamBlocks blocks;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const std::string p = "kernel" + std::to_string(l);
    layers_[l].alpha.append_parameters(p + ".alpha", blocks);
    layers_[l].beta.append_parameters(p + ".beta", blocks);
    layers_[l].gamma.append_parameters(p + ".gamma", blocks);
    blocks.push_back({p + ".theta", nn::as_span(layers_[l].theta)});
  }
  score_.append_parameters("score", blocks);
  blocks.push_back({"angle0.weight", nn::as_span(angle_first_.weight)});
  blocks.push_back({"angle0.bias", nn::as_span(angle_first_.bias)});
  angle_rest_.append_parameters("angle_rest", blocks);
  return blocks;
}

std::size_t GvoNetwork::parameter_count() { return nn::total_size(parameters()); }

void save_gvo(const std::filesystem::path& path, GvoNetwork& net) {
  const auto& s = net.shape();
  nn::Checkpoint ck;
  ck.kind = nn::NetworkKind::gvo;
  ck.descriptor.push_back(s.m);
  ck.descriptor.push_back(static_cast<std::int64_t>(s.kernel_widths.size()));
  for (int w : s.kernel_widths) ck.descriptor.push_back(w);
  ck.descriptor.push_back(s.score_hidden);
  ck.descriptor.push_back(static_cast<std::int64_t>(s.angle_hidden.size()));
  for (int w : s.angle_hidden) ck.descriptor.push_back(w);
  ck.descriptor.push_back(s.use_score ? 1 : 0);
  ck.descriptor.push_back(s.use_kernel_weight ? 1 : 0);
  ck.values = nn::flatten(net.parameters());
  nn::write_checkpoint(path, ck);
}

GvoNetwork load_gvo(const std::filesystem::path& path) {
  const auto ck = nn::read_checkpoint(path);
  if (ck.kind != nn::NetworkKind::gvo) throw IoError(path.string() + ": not a GVO checkpoint");
  const auto& d = ck.descriptor;
  std::size_t at = 0;
  auto next = [&]() -> std::int64_t {
    if (at >= d.size()) throw IoError(path.string() + ": truncated GVO descriptor");
    return d[at++];
  };
  GvoShape s;
  s.m = static_cast<int>(next());
  auto count = [&]() {
    const auto c = next();
    if (c < 1 || c > 64) throw IoError(path.string() + ": implausible GVO layer count");
    return static_cast<std::size_t>(c);
  };
  s.kernel_widths.resize(count());
  for (auto& w : s.kernel_widths) w = static_cast<int>(next());
  s.score_hidden = static_cast<int>(next());
  s.angle_hidden.resize(count());
  for (auto& w : s.angle_hidden) w = static_cast<int>(next());
  s.use_score = next() != 0;
  s.use_kernel_weight = next() != 0;
  if (at != d.size()) throw IoError(path.string() + ": malformed GVO descriptor");
  GvoNetwork net;
  try {
    net = GvoNetwork(s);
    nn::assign(net.parameters(), ck.values);
  } catch (const InvalidArgument& e) {
    throw IoError(path.string() + ": " + e.what());
  }
  return net;
}

}  // namespace nf::gvo
