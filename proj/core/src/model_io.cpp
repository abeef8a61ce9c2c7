#include <array>
#include <cstring>
#include <fstream>

#include "ctstage/error.hpp"
#include "ctstage/learn.hpp"

namespace ctstage {

namespace {

constexpr std::array<char, 8> kMagic{'C', 'T', 'S', 'T', 'G', 'R', 'E', 'G'};
constexpr std::uint32_t kModelVersion = 1;

class Writer {
 public:
  explicit Writer(std::ofstream& out) : out_(out) {}
  template <typename T>
  void put(T v) {
    out_.write(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  void put_doubles(const std::vector<double>& v) {
    put<std::uint64_t>(v.size());
    out_.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
  }

 private:
  std::ofstream& out_;
};

class Reader {
 public:
  Reader(std::ifstream& in, std::string path) : in_(in), path_(std::move(path)) {}
  template <typename T>
  T get() {
    T v{};
    in_.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in_) throw CorruptFileError("truncated model checkpoint " + path_);
    return v;
  }
  std::vector<double> get_doubles(std::size_t expected) {
    const auto n = get<std::uint64_t>();
    if (n != expected) throw CorruptFileError("model checkpoint " + path_ + " has inconsistent array length");
    std::vector<double> v(n);
    in_.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
    if (!in_) throw CorruptFileError("truncated model checkpoint " + path_);
    return v;
  }
  std::size_t count(std::size_t limit) {
    const auto n = get<std::uint64_t>();
    if (n > limit) throw CorruptFileError("model checkpoint " + path_ + " has an implausible count");
    return static_cast<std::size_t>(n);
  }

 private:
  std::ifstream& in_;
  std::string path_;
};

}  // namespace

void save_model(const RegressorModel& model, const std::filesystem::path& path) {
  model.validate();
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw PersistenceError("cannot write model checkpoint " + path.string());
  Writer w(out);
  out.write(kMagic.data(), kMagic.size());
  w.put<std::uint32_t>(kModelVersion);
  w.put<std::uint64_t>(model.spec.in_channels);
  w.put<std::uint64_t>(model.spec.hidden_layers);
  w.put<std::uint64_t>(model.spec.width);
  w.put<std::uint8_t>(model.spec.residual ? 1 : 0);
  w.put_doubles(model.norm.mean);
  w.put_doubles(model.norm.stddev);
  w.put<std::uint64_t>(model.layers.size());
  for (const auto& l : model.layers) {
    w.put<std::uint64_t>(l.in_channels);
    w.put<std::uint64_t>(l.out_channels);
    w.put_doubles(l.weights);
    w.put_doubles(l.bias);
  }
  w.put<std::uint64_t>(model.history.size());
  for (const auto& e : model.history) {
    w.put<std::uint64_t>(e.epoch);
    w.put<double>(e.train_loss);
    w.put<double>(e.val_loss);
  }
  w.put<std::uint64_t>(model.best_epoch);
  if (!out) throw PersistenceError("write failed: " + path.string());
}

RegressorModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PersistenceError("cannot open model checkpoint " + path.string());
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw CorruptFileError("not a model checkpoint (bad magic): " + path.string());
  Reader r(in, path.string());
  const auto version = r.get<std::uint32_t>();
  if (version != kModelVersion)
    throw CorruptFileError("unsupported model checkpoint version " + std::to_string(version));

  RegressorModel m;
  m.spec.in_channels = r.count(3);
  m.spec.hidden_layers = r.count(4096);
  m.spec.width = r.count(1 << 16);
  m.spec.residual = r.get<std::uint8_t>() != 0;
  try {
    m.spec.validate();
  } catch (const ValidationError& e) {
    throw CorruptFileError("model checkpoint " + path.string() + " has an invalid spec: " + e.what());
  }
  m.norm.mean = r.get_doubles(m.spec.in_channels);
  m.norm.stddev = r.get_doubles(m.spec.in_channels);
  const std::size_t n_layers = r.count(4097);
  if (n_layers != m.spec.hidden_layers + 1) throw CorruptFileError("model checkpoint layer count mismatch");
  std::size_t expected_in = m.spec.in_channels;
  for (std::size_t i = 0; i < n_layers; ++i) {
    ConvLayer l;
    l.in_channels = r.count(1 << 16);
    l.out_channels = r.count(1 << 16);
    const std::size_t expected_out = i + 1 == n_layers ? 1 : m.spec.width;
    if (l.in_channels != expected_in || l.out_channels != expected_out)
      throw CorruptFileError("model checkpoint layer shape does not match its spec");
    l.weights = r.get_doubles(l.in_channels * l.out_channels * 9);
    l.bias = r.get_doubles(l.out_channels);
    m.layers.push_back(std::move(l));
    expected_in = m.spec.width;
  }
  const std::size_t n_hist = r.count(1 << 24);
  for (std::size_t i = 0; i < n_hist; ++i) {
    EpochRecord e;
    e.epoch = static_cast<std::size_t>(r.get<std::uint64_t>());
    e.train_loss = r.get<double>();
    e.val_loss = r.get<double>();
    m.history.push_back(e);
  }
  m.best_epoch = static_cast<std::size_t>(r.get<std::uint64_t>());
  try {
    m.validate();
  } catch (const ValidationError& e) {
    throw CorruptFileError("model checkpoint " + path.string() + ": " + e.what());
  }
  return m;
}

}  // namespace ctstage
