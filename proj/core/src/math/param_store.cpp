#include "imt/math/param_store.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>

namespace imt {

std::size_t ParamStore::add(std::string name, std::vector<std::size_t> shape) {
  if (index_.contains(name)) throw std::invalid_argument("duplicate parameter: " + name);
  Parameter p;
  p.name = name;
  p.value = Tensor(shape);
  p.grad = Tensor(shape);
  p.m = Tensor(shape);
  p.v = Tensor(std::move(shape));
  const std::size_t idx = params_.size();
  params_.push_back(std::move(p));
  index_.emplace(std::move(name), idx);
  return idx;
}

std::size_t ParamStore::index_of(std::string_view name) const {
  const auto it = index_.find(std::string(name));
  if (it == index_.end()) throw std::out_of_range("unknown parameter: " + std::string(name));
  return it->second;
}

Parameter& ParamStore::get(std::string_view name) { return params_[index_of(name)]; }
const Parameter& ParamStore::get(std::string_view name) const { return params_[index_of(name)]; }
bool ParamStore::contains(std::string_view name) const { return index_.contains(std::string(name)); }

std::size_t ParamStore::value_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

void ParamStore::zero_grad() {
  for (auto& p : params_) p.grad.fill(0.0);
}

void ParamStore::reset_optimizer() {
  for (auto& p : params_) {
    p.m.fill(0.0);
    p.v.fill(0.0);
  }
  step_ = 0;
}

void ParamStore::init_uniform(double range, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-range, range);
  for (auto& p : params_) {
    for (double& x : p.value.data()) x = dist(rng);
  }
}

double ParamStore::grad_norm() const {
  double sq = 0.0;
  for (const auto& p : params_) sq += p.grad.vec().squaredNorm();
  return std::sqrt(sq);
}

void ParamStore::scale_grad(double factor) {
  for (auto& p : params_) p.grad.vec() *= factor;
}

bool ParamStore::all_finite() const {
  return std::all_of(params_.begin(), params_.end(),
                     [](const Parameter& p) { return p.value.all_finite(); });
}

bool ParamStore::same_values(const ParamStore& other) const {
  if (params_.size() != other.params_.size()) return false;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (params_[i].name != other.params_[i].name) return false;
    if (!(params_[i].value == other.params_[i].value)) return false;
  }
  return true;
}

void adam_step(ParamStore& store, double learning_rate, const AdamOptions& options,
               const std::vector<std::string>* only) {
  store.advance_step();
  const double t = static_cast<double>(store.step());
  const double correction1 = 1.0 - std::pow(options.beta1, t);
  const double correction2 = 1.0 - std::pow(options.beta2, t);
  for (auto& p : store.params()) {
    if (only != nullptr && std::find(only->begin(), only->end(), p.name) == only->end()) {
      p.grad.fill(0.0);
      continue;
    }
    auto value = p.value.vec();
    auto grad = p.grad.vec();
    auto m = p.m.vec();
    auto v = p.v.vec();
    m = options.beta1 * m + (1.0 - options.beta1) * grad;
    v = options.beta2 * v + (1.0 - options.beta2) * grad.cwiseAbs2();
    value.array() -= learning_rate * (m.array() / correction1) /
                     ((v.array() / correction2).sqrt() + options.epsilon);
    grad.setZero();
  }
}

namespace {

constexpr char kMagic[8] = {'I', 'M', 'T', 'C', 'K', 'P', 'T', '\0'};

template <typename T>
void write_pod(std::ostream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw std::runtime_error("checkpoint truncated");
  return value;
}

void write_string(std::ostream& out, const std::string& s) {
  write_pod<std::uint64_t>(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& in) {
  const auto n = read_pod<std::uint64_t>(in);
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  if (!in) throw std::runtime_error("checkpoint truncated");
  return s;
}

void write_doubles(std::ostream& out, const Tensor& t) {
  out.write(reinterpret_cast<const char*>(t.data().data()),
            static_cast<std::streamsize>(t.size() * sizeof(double)));
}

void read_doubles(std::istream& in, Tensor& t) {
  in.read(reinterpret_cast<char*>(t.data().data()),
          static_cast<std::streamsize>(t.size() * sizeof(double)));
  if (!in) throw std::runtime_error("checkpoint truncated");
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ParamStore& store,
                     const std::string& metadata) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open checkpoint for writing: " + path.string());
  out.write(kMagic, sizeof(kMagic));
  write_pod(out, kCheckpointVersion);
  write_string(out, metadata);
  write_pod<std::int64_t>(out, store.step());
  write_pod<std::uint64_t>(out, store.size());
  for (const auto& p : store.params()) {
    write_string(out, p.name);
    write_pod<std::uint64_t>(out, p.value.rank());
    for (std::size_t d : p.value.shape()) write_pod<std::uint64_t>(out, d);
    write_doubles(out, p.value);
    write_doubles(out, p.m);
    write_doubles(out, p.v);
  }
  if (!out) throw std::runtime_error("failed writing checkpoint: " + path.string());
}

ParamStore load_checkpoint(const std::filesystem::path& path, std::string* metadata) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path.string());
  char magic[sizeof(kMagic)];
  in.read(magic, sizeof(magic));
  if (!in || !std::equal(magic, magic + sizeof(magic), kMagic)) {
    throw std::runtime_error("not a checkpoint file: " + path.string());
  }
  const auto version = read_pod<std::uint32_t>(in);
  if (version != kCheckpointVersion) {
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
  }
  std::string meta = read_string(in);
  if (metadata != nullptr) *metadata = std::move(meta);

  ParamStore store;
  const auto step = read_pod<std::int64_t>(in);
  const auto count = read_pod<std::uint64_t>(in);
  for (std::uint64_t i = 0; i < count; ++i) {
    std::string name = read_string(in);
    const auto rank = read_pod<std::uint64_t>(in);
    std::vector<std::size_t> shape(rank);
    for (auto& d : shape) d = read_pod<std::uint64_t>(in);
    Parameter& p = store.at(store.add(name, shape));
    read_doubles(in, p.value);
    read_doubles(in, p.m);
    read_doubles(in, p.v);
  }
  for (std::int64_t s = 0; s < step; ++s) store.advance_step();
  return store;
}

}  // namespace imt
