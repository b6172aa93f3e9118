#pragma once

// Desk-scale pre-LN transformer encoder with a tied MLM head and the pointer
// network used for denoising word alignment. Everything is computed in
// double precision with hand-written reverse-mode gradients.
//
// Parameter storage is one flat array in a fixed tensor order (see
// ParamLayout); gradients use the same layout so optimizer, clipping and
// checkpointing work on plain spans.

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "xaw/align_set.hpp"
#include "xaw/ot_aligner.hpp"
#include "xaw/rng.hpp"

namespace xaw {

enum class Precision { f32, f64 };

struct EncoderConfig {
  int vocab_size = 0;
  int layers = 2;
  int hidden = 64;
  int heads = 4;
  int ffn = 256;
  int max_len = 128;
  /// f32: parameters are rounded to float after init and every update, which
  /// makes the float32 checkpoint lossless.
  Precision precision = Precision::f32;
  /// Target-side positions restart at 0 (XLM-style TLM); otherwise positions
  /// run over the whole concatenation.
  bool reset_target_positions = true;
  double dropout = 0.0;
  double init_std = 0.1;

  void validate() const;
  bool operator==(const EncoderConfig&) const = default;
};

/// True when both configs describe the same parameter tensors and positions
/// (the fields an XAW1 checkpoint records).
bool same_architecture(const EncoderConfig& a, const EncoderConfig& b);

enum class TensorKind { embedding, weight, bias, norm_gain, norm_bias };

struct TensorSpec {
  std::string name;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  std::size_t offset = 0;
  TensorKind kind = TensorKind::weight;

  std::size_t size() const { return static_cast<std::size_t>(rows * cols); }
  /// Decoupled weight decay applies to matrices and embeddings only.
  bool decays() const { return kind == TensorKind::weight || kind == TensorKind::embedding; }
};

/// Per-layer tensors, in storage order.
enum LayerTensor {
  ln1_gain, ln1_bias, attn_wq, attn_bq, attn_wk, attn_bk, attn_wv, attn_bv, attn_wo, attn_bo,
  ln2_gain, ln2_bias, ffn_w1, ffn_b1, ffn_w2, ffn_b2, layer_tensor_count
};

/// Tensor order: tok_emb [V,d], pos_emb [P,d], per layer the LayerTensor list,
/// final_ln_gain [d], final_ln_bias [d], mlm_bias [V], ptr_wq [d,d], ptr_wk [d,d].
/// Weight matrices are [in, out] and act on row vectors.
class ParamLayout {
 public:
  explicit ParamLayout(const EncoderConfig& cfg);

  const std::vector<TensorSpec>& tensors() const { return tensors_; }
  std::size_t total() const { return total_; }

  const TensorSpec& tok_emb() const { return tensors_[0]; }
  const TensorSpec& pos_emb() const { return tensors_[1]; }
  const TensorSpec& layer(int l, LayerTensor t) const {
    return tensors_[2 + static_cast<std::size_t>(l) * layer_tensor_count + t];
  }
  const TensorSpec& final_ln_gain() const { return tensors_[tail_ + 0]; }
  const TensorSpec& final_ln_bias() const { return tensors_[tail_ + 1]; }
  const TensorSpec& mlm_bias() const { return tensors_[tail_ + 2]; }
  const TensorSpec& ptr_wq() const { return tensors_[tail_ + 3]; }
  const TensorSpec& ptr_wk() const { return tensors_[tail_ + 4]; }

 private:
  std::vector<TensorSpec> tensors_;
  std::size_t tail_ = 0;
  std::size_t total_ = 0;
};

using MatrixMap = Eigen::Map<Matrix>;
using ConstMatrixMap = Eigen::Map<const Matrix>;

inline MatrixMap view(std::span<double> flat, const TensorSpec& t) {
  return MatrixMap(flat.data() + t.offset, t.rows, t.cols);
}
inline ConstMatrixMap view(std::span<const double> flat, const TensorSpec& t) {
  return ConstMatrixMap(flat.data() + t.offset, t.rows, t.cols);
}

/// All encoder, MLM-head and pointer weights plus a same-shape gradient buffer.
class EncoderParams {
 public:
  explicit EncoderParams(EncoderConfig cfg);

  /// N(0, init_std) matrices and embeddings, zero biases, unit norm gains.
  void init(Rng& rng);
  /// Rounds values to float when the config asks for f32 storage.
  void quantize();
  void zero_grad();

  const EncoderConfig& config() const { return config_; }
  const ParamLayout& layout() const { return layout_; }
  std::size_t size() const { return values.size(); }

  ConstMatrixMap operator[](const TensorSpec& t) const { return view(std::span<const double>(values), t); }
  MatrixMap operator[](const TensorSpec& t) { return view(std::span<double>(values), t); }

  std::vector<double> values;
  std::vector<double> grads;

 private:
  EncoderConfig config_;
  ParamLayout layout_;
};

struct LayerNormCache {
  Matrix xhat;
  Vector rstd;
};

struct BlockCache {
  LayerNormCache ln1;
  Matrix ln1_out, q, k, v, ctx;
  std::vector<Matrix> probs;  // one [T,T] matrix per head
  Matrix attn_drop;           // dropout scale per element, empty when off
  LayerNormCache ln2;
  Matrix ln2_out, pre_act, act;
  Matrix ffn_drop;
};

/// Hidden states of every layer for one sequence, plus what backward needs.
/// hidden[0] is the embedding output; hidden[l] is the residual stream after
/// block l; final_out is the final layer norm of hidden[L].
struct ForwardTrace {
  std::vector<int> tokens;
  std::vector<int> positions;
  std::vector<Matrix> hidden;
  std::vector<BlockCache> blocks;
  LayerNormCache final_ln;
  Matrix final_out;
  bool cached = false;

  std::size_t length() const { return tokens.size(); }
  int top_layer() const { return static_cast<int>(hidden.size()) - 1; }
};

struct EncodeOptions {
  /// Length of the first segment; 0 for a single monolingual sequence.
  std::size_t segment_split = 0;
  /// Keep intermediates for backward.
  bool cache = true;
  /// Stop after this many blocks (-1 = all). Implies no final layer norm.
  int max_layer = -1;
  /// Enables dropout (when config.dropout > 0).
  Rng* dropout_rng = nullptr;
};

ForwardTrace encode(const EncoderParams& params, std::span<const int> tokens, const EncodeOptions& opts = {});

/// Position ids used by encode for a sequence of `length` tokens.
std::vector<int> position_ids(const EncoderConfig& cfg, std::size_t length, std::size_t segment_split);

/// Upstream gradients w.r.t. trace outputs.
struct TraceGrad {
  std::vector<Matrix> d_hidden;
  Matrix d_final_out;
};
TraceGrad make_trace_grad(const ForwardTrace& trace);

/// Reverse pass: accumulates parameter gradients for everything flowing into
/// `upstream`. Throws UsageError when the trace holds no cached forward pass.
void backward(const EncoderParams& params, const ForwardTrace& trace, const TraceGrad& upstream,
              std::span<double> grad);

/// Softmax over keys hidden[key_begin, key_end) for the query hidden[query_pos],
/// logits = (h_q Wq) . (h_k Wk) / sqrt(d_h).
Vector pointer_distribution(const EncoderParams& params, const Matrix& hidden, std::size_t query_pos,
                            std::size_t key_begin, std::size_t key_end);

/// Mean cross-entropy at `targets` (position -> original id) through the tied head.
/// When `upstream`/`grad` are given, accumulates gradients of `scale * loss`.
double mlm_loss(const EncoderParams& params, const ForwardTrace& trace, const std::map<std::size_t, int>& targets,
                TraceGrad* upstream = nullptr, std::span<double> grad = {}, double scale = 1.0);

enum class QueryPolicy { masked, unmasked, all_aligned, none };

struct DwaResult {
  double loss = 0.0;
  std::size_t queries = 0;     // |P|
  std::size_t terms = 0;       // CE terms, one per link of a query
  std::size_t multi_link = 0;  // queries aligned to more than one counterpart
};

/// Query positions in concatenated coordinates (target j -> n + j).
std::vector<std::size_t> dwa_query_positions(const AlignSet& labels, const std::vector<std::size_t>& masked,
                                             std::size_t n, std::size_t m, QueryPolicy policy);

/// Sum of pointer cross-entropies over the query set, read from hidden[layer].
DwaResult dwa_loss(const EncoderParams& params, const ForwardTrace& trace, int layer, const AlignSet& labels,
                   const std::vector<std::size_t>& masked, std::size_t n, std::size_t m,
                   QueryPolicy policy = QueryPolicy::masked, TraceGrad* upstream = nullptr,
                   std::span<double> grad = {}, double scale = 1.0);

}  // namespace xaw
