#pragma once

#include "imt/math/ops.hpp"
#include "imt/math/param_store.hpp"
#include "imt/math/tensor.hpp"
#include "imt/model/vocab.hpp"

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace imt {

struct ModelConfig {
  std::size_t src_vocab = 0;
  std::size_t tgt_vocab = 0;
  std::size_t embed = 32;
  std::size_t enc_hidden = 32;  // per encoder direction; annotations are 2x this
  std::size_t dec_hidden = 64;
  std::size_t readout = 32;
  double init_range = 0.08;
  std::uint64_t seed = 1;

  std::size_t annotation_size() const { return 2 * enc_hidden; }
  std::string to_json() const;
  static ModelConfig from_json(const std::string& text);
};

enum class Direction { kForward = 0, kBackward = 1 };

/// Token a decoder is primed with / must emit to finish, per direction.
/// The backward decoder starts after the last word (EOS) and finishes on BOS.
constexpr TokenId start_token(Direction d) { return d == Direction::kForward ? kBos : kEos; }
constexpr TokenId end_token(Direction d) { return d == Direction::kForward ? kEos : kBos; }
const char* direction_name(Direction d);

/// Encoder output H plus per-decoder attention keys (A_d h_i for every i).
struct Annotations {
  Mat states;               // |source| x annotation_size
  Vec mean;                 // mean row of states
  std::array<Mat, 2> keys;  // |source| x dec_hidden, indexed by Direction

  std::size_t size() const { return static_cast<std::size_t>(states.rows()); }
};

struct DecoderState {
  Vec s;  // recurrent state s_j
  Vec c;  // context c_j that produced it
};

struct AttentionResult {
  Vec context;
  Vec weights;
};

struct StepOutput {
  DecoderState state;
  Vec logits;
};

/// Views of the memory gate/score parameters (W_1, W_2 scalars; W_s, W_c rows).
struct MemoryGateParams {
  double w1;
  double w2;
  ConstVecMap ws;
  ConstVecMap wc;
};

/// Attention encoder-decoder with one shared bidirectional GRU encoder and two
/// GRU decoders (left-to-right and right-to-left) that share target embeddings
/// but own their attention, recurrent and output layers.
class Seq2Seq {
 public:
  explicit Seq2Seq(const ModelConfig& config);
  /// Adopts parameters loaded from a checkpoint; shapes must match `config`.
  Seq2Seq(const ModelConfig& config, ParamStore params);

  const ModelConfig& config() const { return config_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  Annotations encode(std::span<const TokenId> source) const;
  /// Builds Annotations (mean and keys) around externally supplied states.
  Annotations annotations_from(Mat states) const;

  AttentionResult attend(Direction d, const Vec& query, const Annotations& ann) const;
  DecoderState initial_state(Direction d, const Annotations& ann) const;
  StepOutput decoder_step(Direction d, TokenId prev_token, const DecoderState& prev,
                          const Annotations& ann) const;

  /// Teacher-forced pass: element j holds the state/logits that predict
  /// sequence[j] (the terminal token is appended automatically, so the result
  /// has |sequence| + 1 entries). `sequence` is in the decoder's own order.
  std::vector<StepOutput> teacher_force(Direction d, const Annotations& ann,
                                        std::span<const TokenId> sequence) const;

  /// Length-normalized negative log-likelihood of `target` for one decoder.
  /// The backward decoder is scored on the reversed target.
  double direction_loss(Direction d, std::span<const TokenId> source,
                        std::span<const TokenId> target) const;
  /// -(L_L + L_R).
  double joint_loss(std::span<const TokenId> source, std::span<const TokenId> target) const;
  /// Same value as joint_loss; adds `weight` times its gradient into params().grad.
  double joint_loss_and_grad(std::span<const TokenId> source, std::span<const TokenId> target,
                             double weight = 1.0);

  MemoryGateParams memory_gate() const;
  static const std::vector<std::string>& memory_gate_names();

 private:
  struct GruSlots {
    std::size_t W, U, b;
  };
  struct DecoderSlots {
    std::size_t init_W, init_b, att_A;
    GruSlots gru;
    std::size_t read_W, read_b, out_W, out_b;
  };
  struct EncoderTrace;
  struct DecoderTrace;

  void build_layout();
  void validate_token(TokenId id, std::size_t vocab, const char* what) const;
  GruWeights gru_weights(const GruSlots& s) const;
  GruGrads gru_grads(const GruSlots& s);

  EncoderTrace run_encoder(std::span<const TokenId> source) const;
  DecoderTrace run_decoder(Direction d, const Annotations& ann,
                           std::span<const TokenId> sequence) const;
  void backprop_decoder(Direction d, const Annotations& ann, const DecoderTrace& trace,
                        double scale, Mat& d_states);
  void backprop_encoder(const EncoderTrace& trace, const Mat& d_states);

  ModelConfig config_;
  ParamStore params_;
  std::size_t src_emb_ = 0, tgt_emb_ = 0;
  GruSlots enc_fw_{}, enc_bw_{};
  std::array<DecoderSlots, 2> dec_{};
  std::size_t mem_w1_ = 0, mem_w2_ = 0, mem_ws_ = 0, mem_wc_ = 0;
};

/// Mean negative log-likelihood of `gold` under per-step log-probability rows.
double sequence_nll(std::span<const Vec> log_probs, std::span<const TokenId> gold);

}  // namespace imt
