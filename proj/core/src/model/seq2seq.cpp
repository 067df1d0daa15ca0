#include "imt/model/seq2seq.hpp"

#include "imt/math/ops.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace imt {

std::string ModelConfig::to_json() const {
  nlohmann::json j = {{"src_vocab", src_vocab}, {"tgt_vocab", tgt_vocab},   {"embed", embed},
                      {"enc_hidden", enc_hidden}, {"dec_hidden", dec_hidden}, {"readout", readout},
                      {"init_range", init_range}, {"seed", seed}};
  return j.dump();
}

ModelConfig ModelConfig::from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  ModelConfig c;
  c.src_vocab = j.at("src_vocab").get<std::size_t>();
  c.tgt_vocab = j.at("tgt_vocab").get<std::size_t>();
  c.embed = j.value("embed", c.embed);
  c.enc_hidden = j.value("enc_hidden", c.enc_hidden);
  c.dec_hidden = j.value("dec_hidden", c.dec_hidden);
  c.readout = j.value("readout", c.readout);
  c.init_range = j.value("init_range", c.init_range);
  c.seed = j.value("seed", c.seed);
  return c;
}

const char* direction_name(Direction d) { return d == Direction::kForward ? "forward" : "backward"; }

struct Seq2Seq::EncoderTrace {
  std::vector<TokenId> source;
  std::vector<GruCache> fw;
  std::vector<GruCache> bw;
  Annotations ann;
};

struct Seq2Seq::DecoderTrace {
  struct Step {
    TokenId input;
    TokenId gold;
    Vec s_prev;
    Vec alpha;
    Vec c;
    GruCache gru;
    Vec s;
    Vec u;
    Vec t;
    Vec probs;
  };
  Vec s0;
  std::vector<Step> steps;
  double nll = 0.0;  // summed, not normalized
};

Seq2Seq::Seq2Seq(const ModelConfig& config) : config_(config) {
  build_layout();
  params_.init_uniform(config_.init_range, config_.seed);
}

Seq2Seq::Seq2Seq(const ModelConfig& config, ParamStore params) : config_(config) {
  build_layout();
  if (params.size() != params_.size()) throw std::invalid_argument("checkpoint parameter count mismatch");
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const auto& want = params_.at(i);
    const auto& got = params.at(i);
    if (want.name != got.name || want.value.shape() != got.value.shape()) {
      throw std::invalid_argument("checkpoint parameter mismatch at " + want.name);
    }
  }
  params_ = std::move(params);
}

void Seq2Seq::build_layout() {
  const std::size_t E = config_.embed, He = config_.enc_hidden, H = config_.dec_hidden;
  const std::size_t D = config_.annotation_size(), R = config_.readout;
  const std::size_t Vs = config_.src_vocab, Vt = config_.tgt_vocab;
  if (Vs < kReservedCount || Vt < kReservedCount) throw std::invalid_argument("vocab smaller than reserved set");
  if (E == 0 || He == 0 || H == 0 || R == 0) throw std::invalid_argument("model dimensions must be positive");

  src_emb_ = params_.add("src_emb", {Vs, E});
  tgt_emb_ = params_.add("tgt_emb", {Vt, E});
  auto add_gru = [&](const std::string& prefix, std::size_t in, std::size_t hid) {
    GruSlots s{};
    s.W = params_.add(prefix + ".W", {3 * hid, in});
    s.U = params_.add(prefix + ".U", {3 * hid, hid});
    s.b = params_.add(prefix + ".b", {3 * hid});
    return s;
  };
  enc_fw_ = add_gru("enc.fw", E, He);
  enc_bw_ = add_gru("enc.bw", E, He);
  for (Direction d : {Direction::kForward, Direction::kBackward}) {
    const std::string p = d == Direction::kForward ? "dec.fwd" : "dec.bwd";
    DecoderSlots& s = dec_[static_cast<int>(d)];
    s.init_W = params_.add(p + ".init.W", {H, D});
    s.init_b = params_.add(p + ".init.b", {H});
    s.att_A = params_.add(p + ".att.A", {H, D});
    s.gru = add_gru(p + ".gru", E + D, H);
    s.read_W = params_.add(p + ".read.W", {R, H + D});
    s.read_b = params_.add(p + ".read.b", {R});
    s.out_W = params_.add(p + ".out.W", {Vt, R});
    s.out_b = params_.add(p + ".out.b", {Vt});
  }
  mem_w1_ = params_.add("mem.w1", {1});
  mem_w2_ = params_.add("mem.w2", {1});
  mem_ws_ = params_.add("mem.ws", {H});
  mem_wc_ = params_.add("mem.wc", {D});
}

const std::vector<std::string>& Seq2Seq::memory_gate_names() {
  static const std::vector<std::string> kNames = {"mem.w1", "mem.w2", "mem.ws", "mem.wc"};
  return kNames;
}

MemoryGateParams Seq2Seq::memory_gate() const {
  return {params_.at(mem_w1_).value[0], params_.at(mem_w2_).value[0], params_.at(mem_ws_).value.vec(),
          params_.at(mem_wc_).value.vec()};
}

void Seq2Seq::validate_token(TokenId id, std::size_t vocab, const char* what) const {
  if (id < 0 || static_cast<std::size_t>(id) >= vocab) {
    throw std::out_of_range(std::string("invalid ") + what + " token id " + std::to_string(id));
  }
}

GruWeights Seq2Seq::gru_weights(const GruSlots& s) const {
  return {params_.at(s.W).value.mat(), params_.at(s.U).value.mat(), params_.at(s.b).value.vec()};
}

GruGrads Seq2Seq::gru_grads(const GruSlots& s) {
  return {params_.at(s.W).grad.mat(), params_.at(s.U).grad.mat(), params_.at(s.b).grad.vec()};
}

Annotations Seq2Seq::annotations_from(Mat states) const {
  if (states.rows() == 0) throw std::invalid_argument("annotations: empty source");
  if (static_cast<std::size_t>(states.cols()) != config_.annotation_size()) {
    throw std::invalid_argument("annotations: wrong width");
  }
  Annotations ann;
  ann.mean = states.colwise().mean().transpose();
  for (int d = 0; d < 2; ++d) {
    ann.keys[d] = states * params_.at(dec_[d].att_A).value.mat().transpose();
  }
  ann.states = std::move(states);
  return ann;
}

Seq2Seq::EncoderTrace Seq2Seq::run_encoder(std::span<const TokenId> source) const {
  if (source.empty()) throw std::invalid_argument("encode: empty source");
  for (TokenId id : source) validate_token(id, config_.src_vocab, "source");
  const auto T = static_cast<Eigen::Index>(source.size());
  const auto He = static_cast<Eigen::Index>(config_.enc_hidden);
  const ConstMatMap emb = params_.at(src_emb_).value.mat();
  const GruWeights fw = gru_weights(enc_fw_);
  const GruWeights bw = gru_weights(enc_bw_);

  EncoderTrace trace;
  trace.source.assign(source.begin(), source.end());
  trace.fw.resize(source.size());
  trace.bw.resize(source.size());
  Mat states(T, 2 * He);
  Vec h = Vec::Zero(He);
  for (Eigen::Index i = 0; i < T; ++i) {
    h = gru_forward(fw, h, emb.row(source[i]).transpose(), &trace.fw[i]);
    states.row(i).head(He) = h.transpose();
  }
  h = Vec::Zero(He);
  for (Eigen::Index i = T - 1; i >= 0; --i) {
    h = gru_forward(bw, h, emb.row(source[i]).transpose(), &trace.bw[i]);
    states.row(i).tail(He) = h.transpose();
  }
  trace.ann = annotations_from(std::move(states));
  return trace;
}

Annotations Seq2Seq::encode(std::span<const TokenId> source) const {
  return run_encoder(source).ann;
}

AttentionResult Seq2Seq::attend(Direction d, const Vec& query, const Annotations& ann) const {
  const Mat& keys = ann.keys[static_cast<int>(d)];
  if (query.size() != keys.cols()) throw std::invalid_argument("attend: query size mismatch");
  AttentionResult out;
  out.weights = softmax(Vec(keys * query));
  out.context = ann.states.transpose() * out.weights;
  return out;
}

DecoderState Seq2Seq::initial_state(Direction d, const Annotations& ann) const {
  const DecoderSlots& s = dec_[static_cast<int>(d)];
  DecoderState st;
  st.s = (params_.at(s.init_W).value.mat() * ann.mean + params_.at(s.init_b).value.vec()).array().tanh();
  st.c = Vec::Zero(static_cast<Eigen::Index>(config_.annotation_size()));
  return st;
}

StepOutput Seq2Seq::decoder_step(Direction d, TokenId prev_token, const DecoderState& prev,
                                 const Annotations& ann) const {
  validate_token(prev_token, config_.tgt_vocab, "target");
  const DecoderSlots& s = dec_[static_cast<int>(d)];
  const auto E = static_cast<Eigen::Index>(config_.embed);
  const auto H = static_cast<Eigen::Index>(config_.dec_hidden);
  const auto D = static_cast<Eigen::Index>(config_.annotation_size());

  AttentionResult att = attend(d, prev.s, ann);
  Vec x(E + D);
  x.head(E) = params_.at(tgt_emb_).value.mat().row(prev_token).transpose();
  x.tail(D) = att.context;
  StepOutput out;
  out.state.s = gru_forward(gru_weights(s.gru), prev.s, x);
  Vec u(H + D);
  u.head(H) = out.state.s;
  u.tail(D) = att.context;
  const Vec t = (params_.at(s.read_W).value.mat() * u + params_.at(s.read_b).value.vec()).array().tanh();
  out.logits = params_.at(s.out_W).value.mat() * t + params_.at(s.out_b).value.vec();
  out.state.c = std::move(att.context);
  return out;
}

std::vector<StepOutput> Seq2Seq::teacher_force(Direction d, const Annotations& ann,
                                               std::span<const TokenId> sequence) const {
  std::vector<StepOutput> out;
  out.reserve(sequence.size() + 1);
  DecoderState state = initial_state(d, ann);
  TokenId prev = start_token(d);
  for (std::size_t j = 0; j <= sequence.size(); ++j) {
    StepOutput step = decoder_step(d, prev, state, ann);
    state = step.state;
    out.push_back(std::move(step));
    if (j < sequence.size()) prev = sequence[j];
  }
  return out;
}

Seq2Seq::DecoderTrace Seq2Seq::run_decoder(Direction d, const Annotations& ann,
                                           std::span<const TokenId> sequence) const {
  const DecoderSlots& slots = dec_[static_cast<int>(d)];
  const auto E = static_cast<Eigen::Index>(config_.embed);
  const auto H = static_cast<Eigen::Index>(config_.dec_hidden);
  const auto D = static_cast<Eigen::Index>(config_.annotation_size());
  const ConstMatMap emb = params_.at(tgt_emb_).value.mat();
  const GruWeights gru = gru_weights(slots.gru);
  const ConstMatMap read_W = params_.at(slots.read_W).value.mat();
  const ConstVecMap read_b = params_.at(slots.read_b).value.vec();
  const ConstMatMap out_W = params_.at(slots.out_W).value.mat();
  const ConstVecMap out_b = params_.at(slots.out_b).value.vec();
  const Mat& keys = ann.keys[static_cast<int>(d)];

  DecoderTrace trace;
  trace.s0 = initial_state(d, ann).s;
  trace.steps.resize(sequence.size() + 1);
  Vec s = trace.s0;
  for (std::size_t j = 0; j < trace.steps.size(); ++j) {
    auto& st = trace.steps[j];
    st.input = j == 0 ? start_token(d) : sequence[j - 1];
    st.gold = j < sequence.size() ? sequence[j] : end_token(d);
    validate_token(st.input, config_.tgt_vocab, "target");
    validate_token(st.gold, config_.tgt_vocab, "target");
    st.s_prev = s;
    st.alpha = softmax(Vec(keys * s));
    st.c = ann.states.transpose() * st.alpha;
    Vec x(E + D);
    x.head(E) = emb.row(st.input).transpose();
    x.tail(D) = st.c;
    st.s = gru_forward(gru, s, x, &st.gru);
    st.u.resize(H + D);
    st.u.head(H) = st.s;
    st.u.tail(D) = st.c;
    st.t = (read_W * st.u + read_b).array().tanh();
    const Vec logits = out_W * st.t + out_b;
    st.probs = softmax(logits);
    const double peak = logits.maxCoeff();
    const double log_z = std::log((logits.array() - peak).exp().sum()) + peak;
    trace.nll -= logits[st.gold] - log_z;
    s = st.s;
  }
  return trace;
}

void Seq2Seq::backprop_decoder(Direction d, const Annotations& ann, const DecoderTrace& trace,
                               double scale, Mat& d_states) {
  const DecoderSlots& slots = dec_[static_cast<int>(d)];
  const auto E = static_cast<Eigen::Index>(config_.embed);
  const auto H = static_cast<Eigen::Index>(config_.dec_hidden);
  const auto D = static_cast<Eigen::Index>(config_.annotation_size());
  const GruWeights gru = gru_weights(slots.gru);
  GruGrads gru_g = gru_grads(slots.gru);
  const ParamStore& cp = params_;
  const ConstMatMap read_W = cp.at(slots.read_W).value.mat();
  const ConstMatMap out_W = cp.at(slots.out_W).value.mat();
  const ConstMatMap att_A = cp.at(slots.att_A).value.mat();
  MatMap g_read_W = params_.at(slots.read_W).grad.mat();
  VecMap g_read_b = params_.at(slots.read_b).grad.vec();
  MatMap g_out_W = params_.at(slots.out_W).grad.mat();
  VecMap g_out_b = params_.at(slots.out_b).grad.vec();
  MatMap g_att_A = params_.at(slots.att_A).grad.mat();
  MatMap g_emb = params_.at(tgt_emb_).grad.mat();
  const Mat& keys = ann.keys[static_cast<int>(d)];

  Vec ds_next = Vec::Zero(H);
  Vec ds_prev, dx;
  for (std::size_t jj = trace.steps.size(); jj-- > 0;) {
    const auto& st = trace.steps[jj];
    Vec dlogits = st.probs * scale;
    dlogits[st.gold] -= scale;
    g_out_W.noalias() += dlogits * st.t.transpose();
    g_out_b += dlogits;
    const Vec dpre_t = (out_W.transpose() * dlogits).array() * (1.0 - st.t.array().square());
    g_read_W.noalias() += dpre_t * st.u.transpose();
    g_read_b += dpre_t;
    const Vec du = read_W.transpose() * dpre_t;
    Vec ds = ds_next + du.head(H);
    Vec dc = du.tail(D);

    gru_backward(gru, st.gru, ds, gru_g, ds_prev, dx);
    g_emb.row(st.input) += dx.head(E).transpose();
    dc += dx.tail(D);

    // c = H^T alpha, alpha = softmax(keys s_prev), keys = H A^T.
    const Vec dalpha = ann.states * dc;
    const Vec de = softmax_backward(st.alpha, dalpha);
    ds_prev.noalias() += keys.transpose() * de;
    const Mat dkeys = de * st.s_prev.transpose();
    g_att_A.noalias() += dkeys.transpose() * ann.states;
    d_states.noalias() += st.alpha * dc.transpose();
    d_states.noalias() += dkeys * att_A;
    ds_next = ds_prev;
  }

  const Vec dpre = ds_next.array() * (1.0 - trace.s0.array().square());
  params_.at(slots.init_W).grad.mat().noalias() += dpre * ann.mean.transpose();
  params_.at(slots.init_b).grad.vec() += dpre;
  const Vec dmean = cp.at(slots.init_W).value.mat().transpose() * dpre;
  d_states.rowwise() += dmean.transpose() / static_cast<double>(ann.size());
}

void Seq2Seq::backprop_encoder(const EncoderTrace& trace, const Mat& d_states) {
  const auto He = static_cast<Eigen::Index>(config_.enc_hidden);
  const auto T = static_cast<Eigen::Index>(trace.fw.size());
  MatMap g_emb = params_.at(src_emb_).grad.mat();
  const GruWeights fw = gru_weights(enc_fw_);
  const GruWeights bw = gru_weights(enc_bw_);
  GruGrads fw_g = gru_grads(enc_fw_);
  GruGrads bw_g = gru_grads(enc_bw_);
  Vec dh_next = Vec::Zero(He);
  Vec dh_prev, dx;
  for (Eigen::Index i = T - 1; i >= 0; --i) {
    const Vec dh = d_states.row(i).head(He).transpose() + dh_next;
    gru_backward(fw, trace.fw[i], dh, fw_g, dh_prev, dx);
    g_emb.row(trace.source[i]) += dx.transpose();
    dh_next = dh_prev;
  }
  dh_next.setZero();
  for (Eigen::Index i = 0; i < T; ++i) {
    const Vec dh = d_states.row(i).tail(He).transpose() + dh_next;
    gru_backward(bw, trace.bw[i], dh, bw_g, dh_prev, dx);
    g_emb.row(trace.source[i]) += dx.transpose();
    dh_next = dh_prev;
  }
}

double Seq2Seq::direction_loss(Direction d, std::span<const TokenId> source,
                               std::span<const TokenId> target) const {
  if (target.empty()) throw std::invalid_argument("loss: empty target");
  const Annotations ann = encode(source);
  std::vector<TokenId> seq(target.begin(), target.end());
  if (d == Direction::kBackward) std::reverse(seq.begin(), seq.end());
  const DecoderTrace trace = run_decoder(d, ann, seq);
  return trace.nll / static_cast<double>(trace.steps.size());
}

double Seq2Seq::joint_loss(std::span<const TokenId> source, std::span<const TokenId> target) const {
  return direction_loss(Direction::kForward, source, target) +
         direction_loss(Direction::kBackward, source, target);
}

double Seq2Seq::joint_loss_and_grad(std::span<const TokenId> source, std::span<const TokenId> target,
                                    double weight) {
  if (target.empty()) throw std::invalid_argument("loss: empty target");
  const EncoderTrace enc = run_encoder(source);
  std::vector<TokenId> reversed(target.rbegin(), target.rend());
  const DecoderTrace fwd = run_decoder(Direction::kForward, enc.ann, target);
  const DecoderTrace bwd = run_decoder(Direction::kBackward, enc.ann, reversed);
  const double n = static_cast<double>(fwd.steps.size());

  Mat d_states = Mat::Zero(enc.ann.states.rows(), enc.ann.states.cols());
  backprop_decoder(Direction::kForward, enc.ann, fwd, weight / n, d_states);
  backprop_decoder(Direction::kBackward, enc.ann, bwd, weight / n, d_states);
  backprop_encoder(enc, d_states);
  return fwd.nll / n + bwd.nll / n;
}

double sequence_nll(std::span<const Vec> log_probs, std::span<const TokenId> gold) {
  if (log_probs.size() != gold.size() || gold.empty()) {
    throw std::invalid_argument("sequence_nll: size mismatch");
  }
  double total = 0.0;
  for (std::size_t j = 0; j < gold.size(); ++j) total -= log_probs[j][gold[j]];
  return total / static_cast<double>(gold.size());
}

}  // namespace imt
