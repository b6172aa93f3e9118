#include "xaw/neural.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "xaw/errors.hpp"

namespace xaw {

namespace {

constexpr double kLayerNormEps = 1e-5;

using RowVector = Eigen::RowVectorXd;

}  // namespace

void EncoderConfig::validate() const {
  if (vocab_size < 1 || layers < 1 || hidden < 1 || heads < 1 || ffn < 1 || max_len < 1)
    throw InputError("encoder sizes must all be at least 1");
  if (hidden % heads != 0) throw InputError("hidden size must be divisible by the number of heads");
  if (dropout < 0.0 || dropout >= 1.0) throw InputError("dropout must lie in [0, 1)");
}

bool same_architecture(const EncoderConfig& a, const EncoderConfig& b) {
  return a.vocab_size == b.vocab_size && a.layers == b.layers && a.hidden == b.hidden && a.heads == b.heads &&
         a.ffn == b.ffn && a.max_len == b.max_len && a.precision == b.precision &&
         a.reset_target_positions == b.reset_target_positions;
}

ParamLayout::ParamLayout(const EncoderConfig& cfg) {
  cfg.validate();
  const Eigen::Index v = cfg.vocab_size, d = cfg.hidden, f = cfg.ffn, p = cfg.max_len;
  auto add = [this](std::string name, Eigen::Index rows, Eigen::Index cols, TensorKind kind) {
    tensors_.push_back({std::move(name), rows, cols, total_, kind});
    total_ += static_cast<std::size_t>(rows * cols);
  };
  add("tok_emb", v, d, TensorKind::embedding);
  add("pos_emb", p, d, TensorKind::embedding);
  for (int l = 0; l < cfg.layers; ++l) {
    const std::string pre = "layer" + std::to_string(l) + ".";
    add(pre + "ln1_gain", 1, d, TensorKind::norm_gain);
    add(pre + "ln1_bias", 1, d, TensorKind::norm_bias);
    add(pre + "attn_wq", d, d, TensorKind::weight);
    add(pre + "attn_bq", 1, d, TensorKind::bias);
    add(pre + "attn_wk", d, d, TensorKind::weight);
    add(pre + "attn_bk", 1, d, TensorKind::bias);
    add(pre + "attn_wv", d, d, TensorKind::weight);
    add(pre + "attn_bv", 1, d, TensorKind::bias);
    add(pre + "attn_wo", d, d, TensorKind::weight);
    add(pre + "attn_bo", 1, d, TensorKind::bias);
    add(pre + "ln2_gain", 1, d, TensorKind::norm_gain);
    add(pre + "ln2_bias", 1, d, TensorKind::norm_bias);
    add(pre + "ffn_w1", d, f, TensorKind::weight);
    add(pre + "ffn_b1", 1, f, TensorKind::bias);
    add(pre + "ffn_w2", f, d, TensorKind::weight);
    add(pre + "ffn_b2", 1, d, TensorKind::bias);
  }
  tail_ = tensors_.size();
  add("final_ln_gain", 1, d, TensorKind::norm_gain);
  add("final_ln_bias", 1, d, TensorKind::norm_bias);
  add("mlm_bias", 1, v, TensorKind::bias);
  add("ptr_wq", d, d, TensorKind::weight);
  add("ptr_wk", d, d, TensorKind::weight);
}

EncoderParams::EncoderParams(EncoderConfig cfg)
    : config_(std::move(cfg)), layout_(config_) {
  values.assign(layout_.total(), 0.0);
  grads.assign(layout_.total(), 0.0);
  for (const auto& t : layout_.tensors())
    if (t.kind == TensorKind::norm_gain) (*this)[t].setOnes();
}

void EncoderParams::init(Rng& rng) {
  for (const auto& t : layout_.tensors()) {
    auto w = (*this)[t];
    switch (t.kind) {
      case TensorKind::embedding:
      case TensorKind::weight:
        for (Eigen::Index k = 0; k < w.size(); ++k) w.data()[k] = config_.init_std * normal01(rng);
        break;
      case TensorKind::norm_gain:
        w.setOnes();
        break;
      case TensorKind::bias:
      case TensorKind::norm_bias:
        w.setZero();
        break;
    }
  }
  quantize();
  zero_grad();
}

void EncoderParams::quantize() {
  if (config_.precision != Precision::f32) return;
  for (double& x : values) x = static_cast<double>(static_cast<float>(x));
}

void EncoderParams::zero_grad() { std::fill(grads.begin(), grads.end(), 0.0); }

namespace {

Matrix layer_norm(const Matrix& x, const ConstMatrixMap& gain, const ConstMatrixMap& bias, LayerNormCache& cache) {
  const Eigen::Index t = x.rows();
  cache.xhat.resize(t, x.cols());
  cache.rstd.resize(t);
  for (Eigen::Index r = 0; r < t; ++r) {
    const double mean = x.row(r).mean();
    const double var = (x.row(r).array() - mean).square().mean();
    const double rstd = 1.0 / std::sqrt(var + kLayerNormEps);
    cache.rstd[r] = rstd;
    cache.xhat.row(r) = (x.row(r).array() - mean) * rstd;
  }
  Matrix y = cache.xhat.array().rowwise() * gain.row(0).array();
  y.rowwise() += bias.row(0);
  return y;
}

Matrix layer_norm_backward(const Matrix& dy, const LayerNormCache& cache, const ConstMatrixMap& gain,
                           MatrixMap dgain, MatrixMap dbias) {
  dgain.row(0) += dy.cwiseProduct(cache.xhat).colwise().sum();
  dbias.row(0) += dy.colwise().sum();
  const Matrix dxhat = dy.array().rowwise() * gain.row(0).array();
  Matrix dx(dy.rows(), dy.cols());
  for (Eigen::Index r = 0; r < dy.rows(); ++r) {
    const double mean_d = dxhat.row(r).mean();
    const double mean_dx = dxhat.row(r).dot(cache.xhat.row(r)) / static_cast<double>(dy.cols());
    dx.row(r) = cache.rstd[r] * (dxhat.row(r).array() - mean_d - cache.xhat.row(r).array() * mean_dx);
  }
  return dx;
}

Matrix affine(const Matrix& x, const ConstMatrixMap& w, const ConstMatrixMap& b) {
  Matrix y = x * w;
  y.rowwise() += b.row(0);
  return y;
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * M_SQRT1_2)); }

double gelu_grad(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x * M_SQRT1_2));
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
  return cdf + x * pdf;
}

void softmax_rows(Matrix& s) {
  for (Eigen::Index r = 0; r < s.rows(); ++r) {
    const double mx = s.row(r).maxCoeff();
    s.row(r) = (s.row(r).array() - mx).exp();
    s.row(r) /= s.row(r).sum();
  }
}

Matrix dropout_mask(Eigen::Index rows, Eigen::Index cols, double p, Rng& rng) {
  Matrix mask(rows, cols);
  const double keep_scale = 1.0 / (1.0 - p);
  for (Eigen::Index k = 0; k < mask.size(); ++k) mask.data()[k] = bernoulli(rng, p) ? 0.0 : keep_scale;
  return mask;
}

}  // namespace

std::vector<int> position_ids(const EncoderConfig& cfg, std::size_t length, std::size_t segment_split) {
  std::vector<int> pos(length);
  for (std::size_t t = 0; t < length; ++t) {
    const bool second = cfg.reset_target_positions && segment_split > 0 && t >= segment_split;
    pos[t] = static_cast<int>(second ? t - segment_split : t);
  }
  return pos;
}

ForwardTrace encode(const EncoderParams& params, std::span<const int> tokens, const EncodeOptions& opts) {
  const EncoderConfig& cfg = params.config();
  const ParamLayout& lay = params.layout();
  if (tokens.empty()) throw InputError("encode: empty sequence");
  if (tokens.size() > static_cast<std::size_t>(cfg.max_len))
    throw InputError("encode: sequence length " + std::to_string(tokens.size()) + " exceeds max " +
                     std::to_string(cfg.max_len));
  for (int id : tokens)
    if (id < 0 || id >= cfg.vocab_size) throw InputError("encode: token id out of range: " + std::to_string(id));
  const int run_layers = opts.max_layer < 0 ? cfg.layers : std::min(opts.max_layer, cfg.layers);
  const bool use_dropout = opts.dropout_rng != nullptr && cfg.dropout > 0.0;

  ForwardTrace tr;
  tr.tokens.assign(tokens.begin(), tokens.end());
  tr.positions = position_ids(cfg, tokens.size(), opts.segment_split);
  const auto seq = static_cast<Eigen::Index>(tokens.size());
  const Eigen::Index d = cfg.hidden;
  const Eigen::Index dk = d / cfg.heads;
  const double att_scale = 1.0 / std::sqrt(static_cast<double>(dk));

  const auto tok_emb = params[lay.tok_emb()];
  const auto pos_emb = params[lay.pos_emb()];
  Matrix x(seq, d);
  for (Eigen::Index t = 0; t < seq; ++t) x.row(t) = tok_emb.row(tr.tokens[t]) + pos_emb.row(tr.positions[t]);
  tr.hidden.reserve(static_cast<std::size_t>(run_layers) + 1);
  tr.hidden.push_back(x);

  for (int l = 0; l < run_layers; ++l) {
    auto P = [&](LayerTensor t) { return params[lay.layer(l, t)]; };
    BlockCache c;
    c.ln1_out = layer_norm(x, P(ln1_gain), P(ln1_bias), c.ln1);
    c.q = affine(c.ln1_out, P(attn_wq), P(attn_bq));
    c.k = affine(c.ln1_out, P(attn_wk), P(attn_bk));
    c.v = affine(c.ln1_out, P(attn_wv), P(attn_bv));
    c.ctx.resize(seq, d);
    c.probs.resize(static_cast<std::size_t>(cfg.heads));
    for (int h = 0; h < cfg.heads; ++h) {
      Matrix s = (c.q.middleCols(h * dk, dk) * c.k.middleCols(h * dk, dk).transpose()) * att_scale;
      softmax_rows(s);
      c.ctx.middleCols(h * dk, dk) = s * c.v.middleCols(h * dk, dk);
      c.probs[static_cast<std::size_t>(h)] = std::move(s);
    }
    Matrix o = affine(c.ctx, P(attn_wo), P(attn_bo));
    if (use_dropout) {
      c.attn_drop = dropout_mask(seq, d, cfg.dropout, *opts.dropout_rng);
      o = o.cwiseProduct(c.attn_drop);
    }
    const Matrix x_mid = x + o;

    c.ln2_out = layer_norm(x_mid, P(ln2_gain), P(ln2_bias), c.ln2);
    c.pre_act = affine(c.ln2_out, P(ffn_w1), P(ffn_b1));
    c.act = c.pre_act.unaryExpr([](double z) { return gelu(z); });
    Matrix f = affine(c.act, P(ffn_w2), P(ffn_b2));
    if (use_dropout) {
      c.ffn_drop = dropout_mask(seq, d, cfg.dropout, *opts.dropout_rng);
      f = f.cwiseProduct(c.ffn_drop);
    }
    x = x_mid + f;
    tr.hidden.push_back(x);
    if (opts.cache) tr.blocks.push_back(std::move(c));
  }

  if (run_layers == cfg.layers) {
    tr.final_out = layer_norm(x, params[lay.final_ln_gain()], params[lay.final_ln_bias()], tr.final_ln);
  }
  tr.cached = opts.cache && run_layers == cfg.layers;
  return tr;
}

TraceGrad make_trace_grad(const ForwardTrace& trace) {
  TraceGrad g;
  g.d_hidden.reserve(trace.hidden.size());
  for (const auto& h : trace.hidden) g.d_hidden.push_back(Matrix::Zero(h.rows(), h.cols()));
  g.d_final_out = Matrix::Zero(trace.final_out.rows(), trace.final_out.cols());
  return g;
}

void backward(const EncoderParams& params, const ForwardTrace& trace, const TraceGrad& upstream,
              std::span<double> grad) {
  const EncoderConfig& cfg = params.config();
  const ParamLayout& lay = params.layout();
  if (!trace.cached || trace.blocks.size() != static_cast<std::size_t>(cfg.layers))
    throw UsageError("backward called without a cached forward trace");
  if (upstream.d_hidden.size() != trace.hidden.size()) throw UsageError("upstream gradient does not match trace");
  if (grad.size() != params.size()) throw UsageError("gradient buffer has the wrong size");

  const Eigen::Index d = cfg.hidden;
  const Eigen::Index dk = d / cfg.heads;
  const double att_scale = 1.0 / std::sqrt(static_cast<double>(dk));
  const int top = cfg.layers;

  Matrix dx = upstream.d_hidden[static_cast<std::size_t>(top)];
  if (upstream.d_final_out.size() > 0) {
    dx += layer_norm_backward(upstream.d_final_out, trace.final_ln, params[lay.final_ln_gain()],
                              view(grad, lay.final_ln_gain()), view(grad, lay.final_ln_bias()));
  }

  for (int l = top - 1; l >= 0; --l) {
    auto P = [&](LayerTensor t) { return params[lay.layer(l, t)]; };
    auto G = [&](LayerTensor t) { return view(grad, lay.layer(l, t)); };
    const BlockCache& c = trace.blocks[static_cast<std::size_t>(l)];

    // feed-forward branch
    const Matrix df = c.ffn_drop.size() ? Matrix(dx.cwiseProduct(c.ffn_drop)) : dx;
    G(ffn_w2).noalias() += c.act.transpose() * df;
    G(ffn_b2).row(0) += df.colwise().sum();
    Matrix dz = df * P(ffn_w2).transpose();
    dz = dz.cwiseProduct(c.pre_act.unaryExpr([](double z) { return gelu_grad(z); }));
    G(ffn_w1).noalias() += c.ln2_out.transpose() * dz;
    G(ffn_b1).row(0) += dz.colwise().sum();
    const Matrix d_ln2 = dz * P(ffn_w1).transpose();
    const Matrix dx_mid = dx + layer_norm_backward(d_ln2, c.ln2, P(ln2_gain), G(ln2_gain), G(ln2_bias));

    // attention branch
    const Matrix d_o = c.attn_drop.size() ? Matrix(dx_mid.cwiseProduct(c.attn_drop)) : dx_mid;
    G(attn_wo).noalias() += c.ctx.transpose() * d_o;
    G(attn_bo).row(0) += d_o.colwise().sum();
    const Matrix dctx = d_o * P(attn_wo).transpose();
    Matrix dq(c.q.rows(), d), dk_(c.k.rows(), d), dv(c.v.rows(), d);
    for (int h = 0; h < cfg.heads; ++h) {
      const Matrix& pr = c.probs[static_cast<std::size_t>(h)];
      const auto dctx_h = dctx.middleCols(h * dk, dk);
      const Matrix dp = dctx_h * c.v.middleCols(h * dk, dk).transpose();
      dv.middleCols(h * dk, dk) = pr.transpose() * dctx_h;
      const Eigen::VectorXd row_dot = dp.cwiseProduct(pr).rowwise().sum();
      Matrix ds = pr.cwiseProduct(dp.colwise() - row_dot) * att_scale;
      dq.middleCols(h * dk, dk) = ds * c.k.middleCols(h * dk, dk);
      dk_.middleCols(h * dk, dk) = ds.transpose() * c.q.middleCols(h * dk, dk);
    }
    G(attn_wq).noalias() += c.ln1_out.transpose() * dq;
    G(attn_bq).row(0) += dq.colwise().sum();
    G(attn_wk).noalias() += c.ln1_out.transpose() * dk_;
    G(attn_bk).row(0) += dk_.colwise().sum();
    G(attn_wv).noalias() += c.ln1_out.transpose() * dv;
    G(attn_bv).row(0) += dv.colwise().sum();
    const Matrix d_ln1 =
        dq * P(attn_wq).transpose() + dk_ * P(attn_wk).transpose() + dv * P(attn_wv).transpose();
    dx = dx_mid + layer_norm_backward(d_ln1, c.ln1, P(ln1_gain), G(ln1_gain), G(ln1_bias));
    dx += upstream.d_hidden[static_cast<std::size_t>(l)];
  }

  auto d_tok = view(grad, lay.tok_emb());
  auto d_pos = view(grad, lay.pos_emb());
  for (Eigen::Index t = 0; t < dx.rows(); ++t) {
    d_tok.row(trace.tokens[static_cast<std::size_t>(t)]) += dx.row(t);
    d_pos.row(trace.positions[static_cast<std::size_t>(t)]) += dx.row(t);
  }
}

namespace {

Vector softmax(const Vector& logits) {
  Vector p = (logits.array() - logits.maxCoeff()).exp();
  return p / p.sum();
}

double log_sum_exp(const Vector& logits) {
  const double mx = logits.maxCoeff();
  return mx + std::log((logits.array() - mx).exp().sum());
}

}  // namespace

Vector pointer_distribution(const EncoderParams& params, const Matrix& hidden, std::size_t query_pos,
                            std::size_t key_begin, std::size_t key_end) {
  if (key_end <= key_begin) throw InputError("pointer_distribution: empty key range");
  if (key_end > static_cast<std::size_t>(hidden.rows()) || query_pos >= static_cast<std::size_t>(hidden.rows()))
    throw InputError("pointer_distribution: position out of range");
  if (query_pos >= key_begin && query_pos < key_end)
    throw InputError("pointer_distribution: query lies inside the key range");
  const auto& lay = params.layout();
  const double scale = 1.0 / std::sqrt(static_cast<double>(params.config().hidden));
  const RowVector q = hidden.row(static_cast<Eigen::Index>(query_pos)) * params[lay.ptr_wq()];
  const Matrix keys = hidden.middleRows(static_cast<Eigen::Index>(key_begin),
                                        static_cast<Eigen::Index>(key_end - key_begin)) *
                      params[lay.ptr_wk()];
  return softmax((keys * q.transpose()) * scale);
}

double mlm_loss(const EncoderParams& params, const ForwardTrace& trace, const std::map<std::size_t, int>& targets,
                TraceGrad* upstream, std::span<double> grad, double scale) {
  if (targets.empty()) return 0.0;
  if (trace.final_out.rows() == 0) throw UsageError("mlm_loss needs a full forward pass");
  const auto& lay = params.layout();
  const auto emb = params[lay.tok_emb()];
  const auto bias = params[lay.mlm_bias()];
  const bool want_grad = upstream != nullptr && !grad.empty();
  const double count = static_cast<double>(targets.size());

  double loss = 0.0;
  for (const auto& [pos, id] : targets) {
    if (pos >= trace.length()) throw InputError("mlm_loss: masked position out of range");
    const auto y = trace.final_out.row(static_cast<Eigen::Index>(pos));
    const Vector logits = emb * y.transpose() + bias.row(0).transpose();
    loss += log_sum_exp(logits) - logits[id];
    if (want_grad) {
      Vector dlogits = softmax(logits);
      dlogits[id] -= 1.0;
      dlogits *= scale / count;
      view(grad, lay.tok_emb()).noalias() += dlogits * y;
      view(grad, lay.mlm_bias()).row(0) += dlogits.transpose();
      upstream->d_final_out.row(static_cast<Eigen::Index>(pos)) += dlogits.transpose() * emb;
    }
  }
  return loss / count;
}

std::vector<std::size_t> dwa_query_positions(const AlignSet& labels, const std::vector<std::size_t>& masked,
                                             std::size_t n, std::size_t m, QueryPolicy policy) {
  std::set<std::size_t> aligned;
  for (const Link& l : labels.links) {
    if (l.src < 0 || l.tgt < 0 || static_cast<std::size_t>(l.src) >= n || static_cast<std::size_t>(l.tgt) >= m)
      throw InputError("alignment label out of range for (n, m)");
    aligned.insert(static_cast<std::size_t>(l.src));
    aligned.insert(n + static_cast<std::size_t>(l.tgt));
  }
  const std::set<std::size_t> mask_set(masked.begin(), masked.end());
  std::vector<std::size_t> out;
  for (std::size_t p : aligned) {
    const bool is_masked = mask_set.count(p) > 0;
    switch (policy) {
      case QueryPolicy::masked:
        if (is_masked) out.push_back(p);
        break;
      case QueryPolicy::unmasked:
        if (!is_masked) out.push_back(p);
        break;
      case QueryPolicy::all_aligned:
        out.push_back(p);
        break;
      case QueryPolicy::none:
        break;
    }
  }
  return out;
}

DwaResult dwa_loss(const EncoderParams& params, const ForwardTrace& trace, int layer, const AlignSet& labels,
                   const std::vector<std::size_t>& masked, std::size_t n, std::size_t m, QueryPolicy policy,
                   TraceGrad* upstream, std::span<double> grad, double scale) {
  if (layer < 0 || layer > trace.top_layer()) throw InputError("dwa_loss: layer out of range");
  if (n + m != trace.length()) throw InputError("dwa_loss: n + m does not match the trace length");
  DwaResult res;
  const auto queries = dwa_query_positions(labels, masked, n, m, policy);
  if (queries.empty()) return res;

  const auto& lay = params.layout();
  const Matrix& h = trace.hidden[static_cast<std::size_t>(layer)];
  const auto wq = params[lay.ptr_wq()];
  const auto wk = params[lay.ptr_wk()];
  const double s = 1.0 / std::sqrt(static_cast<double>(params.config().hidden));
  const auto ni = static_cast<Eigen::Index>(n);
  const auto mi = static_cast<Eigen::Index>(m);
  const bool want_grad = upstream != nullptr && !grad.empty();

  // Block 0 = source keys (queried by target tokens), block 1 = target keys.
  const Matrix keys[2] = {h.topRows(ni) * wk, h.bottomRows(mi) * wk};
  Matrix dkeys[2] = {Matrix::Zero(ni, h.cols()), Matrix::Zero(mi, h.cols())};

  for (std::size_t p : queries) {
    const bool from_source = p < n;
    const int block = from_source ? 1 : 0;
    std::vector<int> gold;
    for (const Link& l : labels.links) {
      if (from_source && static_cast<std::size_t>(l.src) == p) gold.push_back(l.tgt);
      if (!from_source && n + static_cast<std::size_t>(l.tgt) == p) gold.push_back(l.src);
    }
    ++res.queries;
    if (gold.size() > 1) ++res.multi_link;

    const RowVector q = h.row(static_cast<Eigen::Index>(p)) * wq;
    const Vector logits = (keys[block] * q.transpose()) * s;
    const double lse = log_sum_exp(logits);
    Vector dlogits = Vector::Zero(logits.size());
    const Vector prob = softmax(logits);
    for (int g : gold) {
      res.loss += lse - logits[g];
      ++res.terms;
      dlogits += prob;
      dlogits[g] -= 1.0;
    }
    if (want_grad) {
      dlogits *= scale * s;
      const RowVector dq = dlogits.transpose() * keys[block];
      dkeys[block].noalias() += dlogits * q;
      view(grad, lay.ptr_wq()).noalias() += h.row(static_cast<Eigen::Index>(p)).transpose() * dq;
      upstream->d_hidden[static_cast<std::size_t>(layer)].row(static_cast<Eigen::Index>(p)) += dq * wq.transpose();
    }
  }

  if (want_grad) {
    auto d_wk = view(grad, lay.ptr_wk());
    auto& dh = upstream->d_hidden[static_cast<std::size_t>(layer)];
    d_wk.noalias() += h.topRows(ni).transpose() * dkeys[0];
    d_wk.noalias() += h.bottomRows(mi).transpose() * dkeys[1];
    dh.topRows(ni) += dkeys[0] * wk.transpose();
    dh.bottomRows(mi) += dkeys[1] * wk.transpose();
  }
  return res;
}

}  // namespace xaw
