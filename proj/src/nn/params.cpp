#include "platoon/nn/params.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace platoon::nn {

int ParameterStore::add(std::string name, Mat value) {
  for (const auto& n : names_)
    if (n == name) throw std::invalid_argument("duplicate parameter '" + name + "'");
  names_.push_back(std::move(name));
  values_.push_back(std::move(value));
  return size() - 1;
}

int ParameterStore::index(const std::string& name) const {
  for (int i = 0; i < size(); ++i)
    if (names_[i] == name) return i;
  throw std::out_of_range("no parameter '" + name + "'");
}

std::size_t ParameterStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& v : values_) n += static_cast<std::size_t>(v.size());
  return n;
}

std::vector<Mat> ParameterStore::zeros_like() const {
  std::vector<Mat> out;
  out.reserve(values_.size());
  for (const auto& v : values_) out.push_back(Mat::Zero(v.rows(), v.cols()));
  return out;
}

bool ParameterStore::same_layout(const ParameterStore& o) const {
  if (size() != o.size()) return false;
  for (int i = 0; i < size(); ++i)
    if (names_[i] != o.names_[i] || values_[i].rows() != o.values_[i].rows() ||
        values_[i].cols() != o.values_[i].cols())
      return false;
  return true;
}

bool ParameterStore::operator==(const ParameterStore& o) const {
  if (!same_layout(o)) return false;
  for (int i = 0; i < size(); ++i)
    if (std::memcmp(values_[i].data(), o.values_[i].data(), sizeof(double) * values_[i].size()) != 0)
      return false;
  return true;
}

Mat uniform_init(Eigen::Index rows, Eigen::Index cols, Eigen::Index fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<Eigen::Index>(fan_in, 1)));
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = (2.0 * uniform01(rng) - 1.0) * bound;
  return m;
}

double global_norm(const std::vector<Mat>& grads) {
  double s = 0.0;
  for (const auto& g : grads) s += g.squaredNorm();
  return std::sqrt(s);
}

RmsProp::RmsProp(const ParameterStore& store, RmsPropConfig cfg) : cfg_(cfg), sq_(store.zeros_like()) {}

double RmsProp::step(ParameterStore& store, std::vector<Mat>& grads) {
  if (static_cast<int>(grads.size()) != store.size() || sq_.size() != grads.size())
    throw std::invalid_argument("optimizer: gradient set does not match parameters");
  for (int i = 0; i < store.size(); ++i)
    if (!grads[i].allFinite())
      throw std::runtime_error("optimizer: non-finite gradient in '" + store.name(i) + "'");
  const double norm = global_norm(grads);
  if (cfg_.clip_norm > 0.0 && norm > cfg_.clip_norm) {
    const double f = cfg_.clip_norm / (norm + 1e-6);
    for (auto& g : grads) g *= f;
  }
  for (int i = 0; i < store.size(); ++i) {
    sq_[i] = cfg_.alpha * sq_[i] + (1.0 - cfg_.alpha) * grads[i].cwiseProduct(grads[i]);
    store.value(i).array() -= cfg_.lr * grads[i].array() / (sq_[i].array().sqrt() + cfg_.eps);
  }
  return norm;
}

namespace {

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw std::runtime_error("checkpoint: truncated file");
  return v;
}

void put_string(std::ostream& os, const std::string& s) {
  put<std::uint64_t>(os, s.size());
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& is) {
  const auto n = get<std::uint64_t>(is);
  if (n > (1ULL << 32)) throw std::runtime_error("checkpoint: corrupt string length");
  std::string s(n, '\0');
  is.read(s.data(), static_cast<std::streamsize>(n));
  if (!is) throw std::runtime_error("checkpoint: truncated file");
  return s;
}

void put_store(std::ostream& os, const ParameterStore& st) {
  put<std::uint32_t>(os, static_cast<std::uint32_t>(st.size()));
  for (int i = 0; i < st.size(); ++i) {
    put_string(os, st.name(i));
    put<std::uint64_t>(os, static_cast<std::uint64_t>(st.value(i).rows()));
    put<std::uint64_t>(os, static_cast<std::uint64_t>(st.value(i).cols()));
    os.write(reinterpret_cast<const char*>(st.value(i).data()),
             static_cast<std::streamsize>(sizeof(double) * st.value(i).size()));
  }
}

ParameterStore get_store(std::istream& is) {
  ParameterStore st;
  const auto n = get<std::uint32_t>(is);
  for (std::uint32_t i = 0; i < n; ++i) {
    std::string name = get_string(is);
    const auto r = get<std::uint64_t>(is);
    const auto c = get<std::uint64_t>(is);
    if (r * c > (1ULL << 31)) throw std::runtime_error("checkpoint: corrupt tensor shape");
    Mat m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    is.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(sizeof(double) * m.size()));
    if (!is) throw std::runtime_error("checkpoint: truncated tensor '" + name + "'");
    st.add(std::move(name), std::move(m));
  }
  return st;
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write checkpoint '" + path + "'");
  os.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  put<std::uint32_t>(os, kCheckpointVersion);
  put_string(os, ck.header_json);
  put_store(os, ck.params);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(ck.extra.size()));
  for (const auto& e : ck.extra) put_store(os, e);
  if (!os) throw std::runtime_error("failed writing checkpoint '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read checkpoint '" + path + "'");
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0)
    throw std::runtime_error("'" + path + "' is not a checkpoint");
  const auto version = get<std::uint32_t>(is);
  if (version != kCheckpointVersion)
    throw std::runtime_error("checkpoint format version " + std::to_string(version) + " unsupported");
  Checkpoint ck;
  ck.header_json = get_string(is);
  ck.params = get_store(is);
  const auto n = get<std::uint32_t>(is);
  for (std::uint32_t i = 0; i < n; ++i) ck.extra.push_back(get_store(is));
  return ck;
}

}  // namespace platoon::nn
