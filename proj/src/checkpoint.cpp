#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "lgc/errors.hpp"
#include "lgc/training.hpp"

namespace lgc::training {

using diff::Matrix;

namespace {

constexpr char kMagic[8] = {'L', 'G', 'C', 'C', 'K', 'P', 'T', '\0'};
constexpr uint32_t kVersion = 1;

uint64_t fnv1a(const void* data, size_t len, uint64_t h = 0xCBF29CE484222325ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001B3ULL;
  }
  return h;
}

struct Writer {
  std::string buf;
  template <class T>
  void pod(const T& v) {
    static_assert(std::is_trivially_copyable_v<T>);
    const size_t off = buf.size();
    buf.resize(off + sizeof(T));
    std::memcpy(buf.data() + off, &v, sizeof(T));
  }
  void bytes(const void* p, size_t n) { buf.append(static_cast<const char*>(p), n); }
  void str(const std::string& s) {
    pod(static_cast<uint16_t>(s.size()));
    bytes(s.data(), s.size());
  }
  void doubles(const std::vector<double>& v) {
    bytes(v.data(), v.size() * sizeof(double));
  }
};

struct Reader {
  const std::string& buf;
  size_t pos = 0;
  explicit Reader(const std::string& b) : buf(b) {}
  void need(size_t n) const {
    if (pos + n > buf.size()) throw ParseError("checkpoint: truncated file");
  }
  template <class T>
  T pod() {
    static_assert(std::is_trivially_copyable_v<T>);
    need(sizeof(T));
    T v;
    std::memcpy(&v, buf.data() + pos, sizeof(T));
    pos += sizeof(T);
    return v;
  }
  std::string str() {
    const uint16_t n = pod<uint16_t>();
    need(n);
    std::string s(buf.data() + pos, n);
    pos += n;
    return s;
  }
  void doubles(std::vector<double>& out, size_t n) {
    need(n * sizeof(double));
    out.resize(n);
    std::memcpy(out.data(), buf.data() + pos, n * sizeof(double));
    pos += n * sizeof(double);
  }
};

void write_matrix(Writer& w, const Matrix& m) {
  w.pod(static_cast<int32_t>(m.rows));
  w.pod(static_cast<int32_t>(m.cols));
  w.doubles(m.data);
}

Matrix read_matrix(Reader& r) {
  const int32_t rows = r.pod<int32_t>();
  const int32_t cols = r.pod<int32_t>();
  if (rows < 0 || cols < 0 || static_cast<int64_t>(rows) * cols > (1 << 28))
    throw ParseError("checkpoint: implausible tensor shape");
  Matrix m;
  m.rows = rows;
  m.cols = cols;
  r.doubles(m.data, static_cast<size_t>(rows) * cols);
  return m;
}

}  // namespace

void save_checkpoint(const Checkpoint& c, const std::string& path) {
  Writer w;
  w.bytes(kMagic, sizeof(kMagic));
  w.pod(kVersion);

  w.pod(static_cast<int32_t>(c.model_cfg.gru_hidden));
  w.pod(static_cast<int32_t>(c.model_cfg.mlp_hidden));
  w.pod(static_cast<int32_t>(c.model_cfg.latent_dim));
  w.pod(static_cast<int32_t>(c.model_cfg.n_proxies));
  w.pod(c.model_cfg.dropout_rate);

  w.pod(c.train_cfg.lr);
  w.pod(static_cast<int32_t>(c.train_cfg.batch_size));
  w.pod(static_cast<int32_t>(c.train_cfg.seq_len));
  w.pod(static_cast<int32_t>(c.train_cfg.max_epochs));
  w.pod(static_cast<int32_t>(c.train_cfg.patience));
  w.pod(c.train_cfg.seed);
  w.pod(static_cast<int32_t>(c.train_cfg.mc_samples));
  w.pod(static_cast<uint8_t>(c.train_cfg.deterministic_latent ? 1 : 0));

  const int n_tensors = c.params.tensor_count();
  if (c.opt.size() != static_cast<size_t>(n_tensors))
    throw ContractError("checkpoint: optimizer state count disagrees with tensor count");
  w.pod(static_cast<uint32_t>(n_tensors));
  size_t slot = 0;
  c.params.for_each_tensor([&](const std::string& name, const Matrix& m) {
    w.str(name);
    write_matrix(w, m);
    const diff::AdamState& s = c.opt[slot++];
    w.pod(static_cast<int64_t>(s.t));
    const Matrix zeros(m.rows, m.cols);  // states of never-stepped tensors
    write_matrix(w, s.m.size() ? s.m : zeros);
    write_matrix(w, s.v.size() ? s.v : zeros);
  });

  w.pod(static_cast<uint32_t>(c.history.size()));
  for (const EpochStats& e : c.history) {
    w.pod(e.train_loss);
    w.pod(e.val_loss);
  }
  const uint64_t checksum = fnv1a(w.buf.data(), w.buf.size());
  w.pod(checksum);

  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("checkpoint: cannot write '" + tmp + "'");
    out.write(w.buf.data(), static_cast<std::streamsize>(w.buf.size()));
    if (!out) throw IoError("checkpoint: write failed for '" + tmp + "'");
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw IoError("checkpoint: cannot move '" + tmp + "' to '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("checkpoint: cannot open '" + path + "'");
  std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  if (buf.size() < sizeof(kMagic) + sizeof(uint32_t) + sizeof(uint64_t))
    throw ParseError("checkpoint: truncated file");
  if (std::memcmp(buf.data(), kMagic, sizeof(kMagic)) != 0)
    throw ParseError("checkpoint: bad magic, not a checkpoint file");

  uint64_t stored_sum;
  std::memcpy(&stored_sum, buf.data() + buf.size() - sizeof(uint64_t), sizeof(uint64_t));
  if (fnv1a(buf.data(), buf.size() - sizeof(uint64_t)) != stored_sum)
    throw ParseError("checkpoint: checksum mismatch (corrupt or truncated)");

  Reader r(buf);
  r.pos = sizeof(kMagic);
  const uint32_t version = r.pod<uint32_t>();
  if (version != kVersion)
    throw FormatError("checkpoint: unsupported version " + std::to_string(version));

  Checkpoint c;
  c.version = version;
  c.model_cfg.gru_hidden = r.pod<int32_t>();
  c.model_cfg.mlp_hidden = r.pod<int32_t>();
  c.model_cfg.latent_dim = r.pod<int32_t>();
  c.model_cfg.n_proxies = r.pod<int32_t>();
  c.model_cfg.dropout_rate = r.pod<double>();

  c.train_cfg.lr = r.pod<double>();
  c.train_cfg.batch_size = r.pod<int32_t>();
  c.train_cfg.seq_len = r.pod<int32_t>();
  c.train_cfg.max_epochs = r.pod<int32_t>();
  c.train_cfg.patience = r.pod<int32_t>();
  c.train_cfg.seed = r.pod<uint64_t>();
  c.train_cfg.mc_samples = r.pod<int32_t>();
  c.train_cfg.deterministic_latent = r.pod<uint8_t>() != 0;

  const uint32_t n_tensors = r.pod<uint32_t>();
  c.params.cfg = c.model_cfg;
  c.opt.resize(n_tensors);
  size_t slot = 0;
  c.params.for_each_tensor([&](const std::string& name, Matrix& m) {
    if (slot >= n_tensors) throw ParseError("checkpoint: tensor directory too short");
    const std::string stored = r.str();
    if (stored != name)
      throw ParseError("checkpoint: expected tensor '" + name + "', found '" + stored + "'");
    m = read_matrix(r);
    diff::AdamState& s = c.opt[slot];
    s.t = r.pod<int64_t>();
    s.m = read_matrix(r);
    s.v = read_matrix(r);
    s.lr = c.train_cfg.lr;
    ++slot;
  });
  if (slot != n_tensors) throw ParseError("checkpoint: tensor directory too long");

  const uint32_t n_epochs = r.pod<uint32_t>();
  c.history.resize(n_epochs);
  for (uint32_t i = 0; i < n_epochs; ++i) {
    c.history[i].train_loss = r.pod<double>();
    c.history[i].val_loss = r.pod<double>();
  }
  return c;
}

void require_compatible(const Checkpoint& c, const model::ModelConfig& expected) {
  Rng dummy(0);
  model::ModelParams ref = model::ModelParams::init(expected, dummy);
  std::vector<std::pair<std::string, std::pair<int, int>>> want;
  ref.for_each_tensor([&](const std::string& name, const Matrix& m) {
    want.emplace_back(name, std::make_pair(m.rows, m.cols));
  });
  size_t i = 0;
  c.params.for_each_tensor([&](const std::string& name, const Matrix& m) {
    if (m.rows != want[i].second.first || m.cols != want[i].second.second)
      throw ShapeError("checkpoint: tensor '" + name + "' has shape " + shape_str(m) +
                       ", expected " + std::to_string(want[i].second.first) + "x" +
                       std::to_string(want[i].second.second));
    ++i;
  });
}

std::string checkpoint_id(const model::ModelParams& params) {
  uint64_t h = 0xCBF29CE484222325ULL;
  params.for_each_tensor([&](const std::string& name, const Matrix& m) {
    h = fnv1a(name.data(), name.size(), h);
    h = fnv1a(m.data.data(), m.data.size() * sizeof(double), h);
  });
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace lgc::training
