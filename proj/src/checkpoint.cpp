#include "zcae/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>

#include "zcae/error.hpp"

namespace zcae {
namespace {

class Writer {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void floats(std::span<const float> v) {
    for (float x : v) u32(std::bit_cast<std::uint32_t>(x));
  }
  void raw(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    bytes_.insert(bytes_.end(), b, b + n);
  }
  void record(const char (&tag)[5], const Writer& payload) {
    raw(tag, 4);
    u64(payload.bytes_.size());
    bytes_.insert(bytes_.end(), payload.bytes_.begin(), payload.bytes_.end());
  }
  std::vector<std::uint8_t>& bytes() { return bytes_; }

 private:
  std::vector<std::uint8_t> bytes_;
};

class Reader {
 public:
  Reader(const std::uint8_t* data, std::size_t size, std::size_t base)
      : data_(data), size_(size), base_(base) {}

  std::size_t offset() const { return base_ + pos_; }
  bool done() const { return pos_ == size_; }

  void need(std::size_t n) const {
    if (size_ - pos_ < n) throw FormatError("checkpoint truncated", offset());
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data_[pos_++]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(data_[pos_++]) << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  AlignedVector<float> floats(std::size_t n) {
    if (n > (size_ - pos_) / 4) throw FormatError("checkpoint truncated", offset());
    AlignedVector<float> v(n);
    for (float& x : v) x = std::bit_cast<float>(u32());
    return v;
  }
  std::string text(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(data_ + pos_), n);
    pos_ += n;
    return s;
  }
  Reader sub(std::size_t n) {
    need(n);
    Reader r(data_ + pos_, n, offset());
    pos_ += n;
    return r;
  }

 private:
  const std::uint8_t* data_;
  std::size_t size_;
  std::size_t base_;
  std::size_t pos_ = 0;
};

void write_dense(Writer& w, const DenseLayer<float>& l) {
  w.u32(static_cast<std::uint32_t>(l.in));
  w.u32(static_cast<std::uint32_t>(l.out));
  w.floats(l.weights);
  w.floats(l.bias);
}

DenseLayer<float> read_dense(Reader& r) {
  DenseLayer<float> l;
  l.in = r.u32();
  l.out = r.u32();
  l.weights = r.floats(l.in * l.out);
  l.bias = r.floats(l.out);
  return l;
}

}  // namespace

Classifier<float> Checkpoint::classifier() const {
  if (!head) throw InputError("missing-head", "checkpoint has no classifier head");
  return Classifier<float>{stack.encoders, *head};
}

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt) {
  Writer out;
  out.raw("ZCAE", 4);
  out.u32(kCheckpointVersion);

  Writer spec;
  const std::string text = ckpt.spec.to_text();
  spec.raw(text.data(), text.size());
  out.record("SPEC", spec);

  Writer depth;
  depth.u64(ckpt.stack.trained_depth);
  out.record("DPTH", depth);

  for (std::size_t l = 0; l < ckpt.stack.size(); ++l) {
    const FilterBank<float>& f = ckpt.stack.encoders[l].filters();
    Writer rec;
    rec.u32(static_cast<std::uint32_t>(l + 1));
    rec.u32(static_cast<std::uint32_t>(f.shape().k));
    rec.u32(static_cast<std::uint32_t>(f.shape().c));
    rec.u32(static_cast<std::uint32_t>(f.shape().kh));
    rec.u32(static_cast<std::uint32_t>(f.shape().kw));
    rec.floats(f.data());
    out.record("FILT", rec);
  }

  if (ckpt.head) {
    Writer rec;
    rec.f64(ckpt.head->dropout);
    write_dense(rec, ckpt.head->hidden);
    write_dense(rec, ckpt.head->output);
    out.record("HEAD", rec);
  }

  const OptimizerState& opt = ckpt.state.optimizer;
  Writer optim;
  optim.f64(opt.hyper.learning_rate);
  optim.f64(opt.hyper.momentum);
  optim.f64(opt.hyper.weight_decay);
  optim.u32(static_cast<std::uint32_t>(opt.velocities.size()));
  for (const auto& v : opt.velocities) {
    optim.u64(v.size());
    optim.floats(v);
  }
  out.record("OPTM", optim);

  Writer stat;
  stat.u32(static_cast<std::uint32_t>(ckpt.state.phase));
  stat.u64(ckpt.state.depth);
  stat.u64(ckpt.state.next_epoch);
  stat.u64(ckpt.state.seed);
  out.record("STAT", stat);
  return std::move(out.bytes());
}

Checkpoint deserialize_checkpoint(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes.data(), bytes.size(), 0);
  if (bytes.size() < 4 || std::memcmp(bytes.data(), "ZCAE", 4) != 0) {
    throw FormatError("bad checkpoint magic", 0);
  }
  r.text(4);
  const std::size_t version_at = r.offset();
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version), version_at);
  }

  Checkpoint ckpt;
  bool have_spec = false, have_depth = false, have_optim = false, have_stat = false;
  std::map<std::size_t, FilterBank<float>> filters;
  while (!r.done()) {
    const std::size_t at = r.offset();
    const std::string tag = r.text(4);
    const std::uint64_t length = r.u64();
    Reader rec = r.sub(length);
    if (tag == "SPEC") {
      ckpt.spec = NetworkSpec::from_text(rec.text(length));
      have_spec = true;
    } else if (tag == "DPTH") {
      ckpt.stack.trained_depth = rec.u64();
      have_depth = true;
    } else if (tag == "FILT") {
      const std::size_t layer = rec.u32();
      FilterShape s;
      s.k = rec.u32();
      s.c = rec.u32();
      s.kh = rec.u32();
      s.kw = rec.u32();
      if (!s.valid()) throw FormatError("invalid filter dims " + s.str(), at);
      filters.emplace(layer, FilterBank<float>(s, rec.floats(s.size())));
    } else if (tag == "HEAD") {
      ClassifierHead<float> head;
      head.dropout = rec.f64();
      head.hidden = read_dense(rec);
      head.output = read_dense(rec);
      ckpt.head = std::move(head);
    } else if (tag == "OPTM") {
      OptimizerState& opt = ckpt.state.optimizer;
      opt.hyper.learning_rate = rec.f64();
      opt.hyper.momentum = rec.f64();
      opt.hyper.weight_decay = rec.f64();
      const std::uint32_t count = rec.u32();
      for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint64_t n = rec.u64();
        opt.velocities.push_back(rec.floats(n));
      }
      have_optim = true;
    } else if (tag == "STAT") {
      const std::uint32_t phase = rec.u32();
      if (phase > static_cast<std::uint32_t>(Phase::done)) throw FormatError("bad phase", at);
      ckpt.state.phase = static_cast<Phase>(phase);
      ckpt.state.depth = rec.u64();
      ckpt.state.next_epoch = rec.u64();
      ckpt.state.seed = rec.u64();
      have_stat = true;
    } else {
      throw FormatError("unknown checkpoint record '" + tag + "'", at);
    }
    if (!rec.done()) throw FormatError("checkpoint record '" + tag + "' has trailing bytes", rec.offset());
  }
  if (!have_spec || !have_depth || !have_optim || !have_stat) {
    throw FormatError("checkpoint is missing required records", bytes.size());
  }
  for (std::size_t l = 0; l < ckpt.spec.conv.size(); ++l) {
    auto it = filters.find(l + 1);
    if (it == filters.end()) {
      throw InputError("missing-layer", "checkpoint has no filters for layer " + std::to_string(l + 1));
    }
    const FilterShape expected = ckpt.spec.filter_shape(l);
    if (!(it->second.shape() == expected)) {
      throw InputError("checkpoint-incompatible", "layer " + std::to_string(l + 1) + ": filters " +
                                                      it->second.shape().str() + " but spec says " +
                                                      expected.str());
    }
    ckpt.stack.encoders.emplace_back(std::move(it->second), ckpt.spec.conv[l].activation,
                                     ckpt.spec.conv[l].pool);
  }
  if (filters.size() != ckpt.spec.conv.size()) {
    throw FormatError("checkpoint has filters for layers not in its spec", bytes.size());
  }
  if (ckpt.head) {
    if (ckpt.head->hidden.in != ckpt.spec.head_fan_in() || ckpt.head->hidden.out != ckpt.spec.hidden ||
        ckpt.head->output.in != ckpt.spec.hidden || ckpt.head->output.out != ckpt.spec.classes) {
      throw InputError("checkpoint-incompatible", "classifier head dims do not match the spec");
    }
  }
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const std::vector<std::uint8_t> bytes = serialize_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("output-not-writable", "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("checkpoint-not-found", "cannot open " + path.string());
  const std::vector<std::uint8_t> bytes(std::istreambuf_iterator<char>(in), {});
  return deserialize_checkpoint(bytes);
}

void require_compatible(const NetworkSpec& checkpoint, const NetworkSpec& expected) {
  auto fail = [](const std::string& what) { throw InputError("checkpoint-incompatible", what); };
  if (checkpoint.in_c != expected.in_c || checkpoint.in_h != expected.in_h || checkpoint.in_w != expected.in_w) {
    fail("input dims differ between checkpoint and config");
  }
  const std::size_t layers = std::max(checkpoint.conv.size(), expected.conv.size());
  for (std::size_t l = 0; l < layers; ++l) {
    if (l >= checkpoint.conv.size() || l >= expected.conv.size()) {
      fail("layer " + std::to_string(l + 1) + ": present in only one of checkpoint/config");
    }
    if (!(checkpoint.filter_shape(l) == expected.filter_shape(l)) ||
        !(checkpoint.conv[l] == expected.conv[l])) {
      fail("layer " + std::to_string(l + 1) + ": checkpoint filters " +
           checkpoint.filter_shape(l).str() + " vs config " + expected.filter_shape(l).str());
    }
  }
  if (checkpoint.hidden != expected.hidden || checkpoint.classes != expected.classes) {
    fail("classifier head sizes differ between checkpoint and config");
  }
}

}  // namespace zcae
