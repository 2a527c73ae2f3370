#include "greendrl/wire.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <string>

#include "greendrl/compression.hpp"
#include "greendrl/error.hpp"

namespace greendrl::wire {

namespace {

constexpr std::uint32_t kSnapshotMagic = 0x4E524447;  // "GDRN"
constexpr std::uint32_t kBatchMagic = 0x42524447;     // "GDRB"
constexpr std::uint16_t kFormatVersion = 1;

static_assert(std::endian::native == std::endian::little, "wire encoders assume a little-endian host");

class Writer {
 public:
  explicit Writer(std::size_t reserve) { buf_.reserve(reserve); }
  template <typename T>
  void put(T v) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    buf_.insert(buf_.end(), p, p + sizeof(T));
  }
  void put_codes(std::span<const std::int32_t> codes, int bits) {
    // LSB-first two's-complement bit packing, padded to a whole byte.
    const std::uint32_t field = (1u << bits) - 1u;
    std::uint64_t acc = 0;
    int filled = 0;
    for (std::int32_t c : codes) {
      acc |= static_cast<std::uint64_t>(static_cast<std::uint32_t>(c) & field) << filled;
      filled += bits;
      while (filled >= 8) {
        buf_.push_back(static_cast<std::uint8_t>(acc & 0xFF));
        acc >>= 8;
        filled -= 8;
      }
    }
    if (filled > 0) buf_.push_back(static_cast<std::uint8_t>(acc & 0xFF));
  }
  std::vector<std::uint8_t> take() { return std::move(buf_); }

 private:
  std::vector<std::uint8_t> buf_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}
  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::vector<std::int32_t> get_codes(std::size_t count, int bits) {
    const std::size_t nbytes = (count * static_cast<std::size_t>(bits) + 7) / 8;
    need(nbytes);
    std::vector<std::int32_t> out(count);
    std::uint64_t acc = 0;
    int filled = 0;
    std::size_t p = pos_;
    const std::uint32_t field = (1u << bits) - 1u;
    const std::uint32_t sign = 1u << (bits - 1);
    for (auto& c : out) {
      while (filled < bits) {
        acc |= static_cast<std::uint64_t>(bytes_[p++]) << filled;
        filled += 8;
      }
      std::uint32_t raw = static_cast<std::uint32_t>(acc) & field;
      acc >>= bits;
      filled -= bits;
      c = (raw & sign) ? static_cast<std::int32_t>(raw) - static_cast<std::int32_t>(1u << bits)
                       : static_cast<std::int32_t>(raw);
    }
    pos_ += nbytes;
    return out;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw InvalidInput("truncated message");
  }
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

std::size_t packed_bytes(std::size_t count, int bits) { return (count * static_cast<std::size_t>(bits) + 7) / 8; }

void check_format(const NetFormat& fmt) {
  if (fmt.encoding == NetEncoding::Quantized) max_code(fmt.bits);
}

}  // namespace

NetFormat NetFormat::from_bits(int bits) {
  if (bits == 32) return {NetEncoding::Float32, 32};
  if (bits == 64) return {NetEncoding::Float64, 64};
  max_code(bits);
  return {NetEncoding::Quantized, bits};
}

std::size_t snapshot_header_bytes(std::size_t num_dims) { return 4 + 2 + 1 + 1 + 8 + 8 + 8 + 4 + 4 * num_dims; }

std::size_t snapshot_bytes(const DenseNet& net, NetFormat fmt) {
  check_format(fmt);
  std::size_t n = snapshot_header_bytes(net.layer_dims().size());
  switch (fmt.encoding) {
    case NetEncoding::Float32:
      return n + 4 * net.param_count();
    case NetEncoding::Float64:
      return n + 8 * net.param_count();
    case NetEncoding::Quantized:
      for (std::size_t l = 0; l < net.num_layers(); ++l)
        n += 8 + 4 + 8 + packed_bytes(net.weights(l).size(), fmt.bits) + packed_bytes(net.biases(l).size(), fmt.bits);
      return n;
  }
  return n;
}

std::vector<std::uint8_t> encode_snapshot(const DenseNet& net, std::uint64_t version, double epsilon, NetFormat fmt) {
  check_format(fmt);
  Writer w(snapshot_bytes(net, fmt));
  w.put(kSnapshotMagic);
  w.put(kFormatVersion);
  w.put(static_cast<std::uint8_t>(fmt.encoding));
  w.put(static_cast<std::uint8_t>(fmt.encoding == NetEncoding::Quantized ? fmt.bits : 0));
  w.put(version);
  w.put(epsilon);
  w.put(net.input_scale);
  w.put(static_cast<std::uint32_t>(net.layer_dims().size()));
  for (std::size_t d : net.layer_dims()) w.put(static_cast<std::uint32_t>(d));
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    switch (fmt.encoding) {
      case NetEncoding::Float32:
        for (double v : net.weights(l)) w.put(static_cast<float>(v));
        for (double v : net.biases(l)) w.put(static_cast<float>(v));
        break;
      case NetEncoding::Float64:
        for (double v : net.weights(l)) w.put(v);
        for (double v : net.biases(l)) w.put(v);
        break;
      case NetEncoding::Quantized: {
        std::optional<double> prior;
        if (net.quant && net.quant->bits == fmt.bits) prior = net.quant->scale.at(l);
        const auto qw = quantize_values(net.weights(l), fmt.bits, prior);
        const auto qb = quantize_values(net.biases(l), fmt.bits);
        w.put(qw.scale);
        w.put(std::int32_t{0});
        w.put(qb.scale);
        w.put_codes(qw.codes, fmt.bits);
        w.put_codes(qb.codes, fmt.bits);
        break;
      }
    }
  }
  return w.take();
}

DecodedSnapshot decode_snapshot(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  if (r.get<std::uint32_t>() != kSnapshotMagic) throw InvalidInput("not a parameter snapshot");
  if (r.get<std::uint16_t>() != kFormatVersion) throw InvalidInput("unsupported snapshot format version");
  DecodedSnapshot out;
  const auto enc = r.get<std::uint8_t>();
  const auto bits = r.get<std::uint8_t>();
  if (enc > 2) throw InvalidInput("unknown snapshot encoding");
  out.format.encoding = static_cast<NetEncoding>(enc);
  out.format.bits = enc == 0 ? 32 : enc == 1 ? 64 : bits;
  check_format(out.format);
  out.version = r.get<std::uint64_t>();
  out.epsilon = r.get<double>();
  const double input_scale = r.get<double>();
  const auto ndims = r.get<std::uint32_t>();
  std::vector<std::size_t> dims(ndims);
  for (auto& d : dims) d = r.get<std::uint32_t>();
  out.net = DenseNet(std::move(dims));
  out.net.input_scale = input_scale;
  std::optional<QuantMeta> meta;
  if (out.format.encoding == NetEncoding::Quantized) meta = QuantMeta{out.format.bits, {}, {}};
  for (std::size_t l = 0; l < out.net.num_layers(); ++l) {
    auto w = out.net.weights(l);
    auto b = out.net.biases(l);
    switch (out.format.encoding) {
      case NetEncoding::Float32:
        for (double& v : w) v = r.get<float>();
        for (double& v : b) v = r.get<float>();
        break;
      case NetEncoding::Float64:
        for (double& v : w) v = r.get<double>();
        for (double& v : b) v = r.get<double>();
        break;
      case NetEncoding::Quantized: {
        const double ws = r.get<double>();
        const auto zp = r.get<std::int32_t>();
        const double bs = r.get<double>();
        if (!(ws > 0.0) || !(bs > 0.0)) throw InvalidInput("non-positive quantization scale");
        const auto wc = r.get_codes(w.size(), out.format.bits);
        const auto bc = r.get_codes(b.size(), out.format.bits);
        for (std::size_t i = 0; i < w.size(); ++i) w[i] = (wc[i] - zp) * ws;
        for (std::size_t i = 0; i < b.size(); ++i) b[i] = bc[i] * bs;
        meta->scale.push_back(ws);
        meta->zero_point.push_back(zp);
        break;
      }
    }
  }
  if (!r.done()) throw InvalidInput("trailing bytes after snapshot");
  out.net.quant = std::move(meta);
  out.net.check();
  return out;
}

std::size_t batch_bytes(std::size_t count, std::size_t state_dim, bool chained) {
  const std::size_t tail = 4 + 4 + 1;
  if (chained) return kBatchHeaderBytes + 4 * state_dim + count * (4 * state_dim + tail);
  return kBatchHeaderBytes + count * (8 * state_dim + tail);
}

std::vector<std::uint8_t> encode_batch(const BatchEnvelope& batch, bool allow_chaining) {
  const auto& ts = batch.transitions;
  if (ts.empty()) throw InvalidInput("sample batch must not be empty");
  const std::size_t dim = ts.front().state.size();
  for (const auto& t : ts) {
    validate(t);
    if (t.state.size() != dim) throw InvalidInput("sample batch mixes state dimensionalities");
  }
  bool chained = allow_chaining;
  for (std::size_t i = 0; chained && i + 1 < ts.size(); ++i) chained = ts[i].next_state == ts[i + 1].state;

  Writer w(batch_bytes(ts.size(), dim, chained));
  w.put(kBatchMagic);
  w.put(kFormatVersion);
  w.put(static_cast<std::uint8_t>(chained ? 1 : 0));
  w.put(std::uint8_t{0});
  w.put(batch.entity_id);
  w.put(batch.snapshot_version);
  w.put(static_cast<std::uint32_t>(ts.size()));
  w.put(static_cast<std::uint32_t>(dim));
  if (chained)
    for (double v : ts.front().state) w.put(static_cast<float>(v));
  for (const auto& t : ts) {
    if (!chained)
      for (double v : t.state) w.put(static_cast<float>(v));
    for (double v : t.next_state) w.put(static_cast<float>(v));
    w.put(static_cast<std::uint32_t>(t.action.index));
    w.put(static_cast<float>(t.reward));
    w.put(static_cast<std::uint8_t>(t.terminal ? 1 : 0));
  }
  return w.take();
}

BatchEnvelope decode_batch(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  if (r.get<std::uint32_t>() != kBatchMagic) throw InvalidInput("not a sample batch");
  if (r.get<std::uint16_t>() != kFormatVersion) throw InvalidInput("unsupported batch format version");
  const bool chained = r.get<std::uint8_t>() & 1;
  r.get<std::uint8_t>();
  BatchEnvelope out;
  out.entity_id = r.get<std::uint32_t>();
  out.snapshot_version = r.get<std::uint64_t>();
  const auto count = r.get<std::uint32_t>();
  const auto dim = r.get<std::uint32_t>();
  if (count == 0) throw InvalidInput("sample batch must not be empty");
  auto read_state = [&] {
    StateVec s(dim);
    for (double& v : s) v = r.get<float>();
    return s;
  };
  StateVec prev;
  if (chained) prev = read_state();
  out.transitions.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    Transition t;
    t.state = chained ? prev : read_state();
    t.next_state = read_state();
    t.action.index = r.get<std::uint32_t>();
    t.reward = r.get<float>();
    t.terminal = r.get<std::uint8_t>() != 0;
    if (chained) prev = t.next_state;
    out.transitions.push_back(std::move(t));
  }
  if (!r.done()) throw InvalidInput("trailing bytes after sample batch");
  return out;
}

}  // namespace greendrl::wire
