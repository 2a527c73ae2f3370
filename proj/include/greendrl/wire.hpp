#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "greendrl/dense_net.hpp"
#include "greendrl/rl_core.hpp"

// Little-endian message encodings exchanged between the coordinator and the
// running entities. Byte counts from these encoders are what the ledgers charge.
namespace greendrl::wire {

enum class NetEncoding : std::uint8_t { Float32 = 0, Float64 = 1, Quantized = 2 };

struct NetFormat {
  NetEncoding encoding = NetEncoding::Float32;
  int bits = 8;  // Quantized only

  static NetFormat from_bits(int bits);  // 32 -> Float32, 64 -> Float64, 2..16 -> Quantized
};

// Snapshot header: magic u32, format u16, encoding u8, bits u8, version u64,
// epsilon f64, input_scale f64, dim count u32, dims u32 each.
std::size_t snapshot_header_bytes(std::size_t num_dims);

// Float32: header + 4 * params. Quantized: header + per layer (weight scale f64,
// zero point i32, bias scale f64, packed weight codes, packed bias codes).
std::size_t snapshot_bytes(const DenseNet& net, NetFormat fmt);

std::vector<std::uint8_t> encode_snapshot(const DenseNet& net, std::uint64_t version, double epsilon,
                                          NetFormat fmt);

struct DecodedSnapshot {
  std::uint64_t version = 0;
  double epsilon = 0.0;
  NetFormat format;
  DenseNet net;
};

DecodedSnapshot decode_snapshot(std::span<const std::uint8_t> bytes);

// Batch header: magic u32, format u16, flags u8, reserved u8, entity u32,
// snapshot version u64, count u32, state dim u32.
inline constexpr std::size_t kBatchHeaderBytes = 28;

// Full record: state f32[d], next_state f32[d], action u32, reward f32, terminal u8.
// Chained batches (flag bit 0) send s_0 once and then per record only
// next_state, action, reward, terminal; valid when next_state[i] == state[i+1].
std::size_t batch_bytes(std::size_t count, std::size_t state_dim, bool chained);

struct BatchEnvelope {
  std::uint32_t entity_id = 0;
  std::uint64_t snapshot_version = 0;
  std::vector<Transition> transitions;
};

// With allow_chaining the encoder chains when the records are contiguous and
// falls back to full records otherwise.
std::vector<std::uint8_t> encode_batch(const BatchEnvelope& batch, bool allow_chaining);

BatchEnvelope decode_batch(std::span<const std::uint8_t> bytes);

}  // namespace greendrl::wire
