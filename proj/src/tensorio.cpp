// Copyright 2026 The qf Authors
// SPDX-License-Identifier: Apache-2.0

#include "qf/tensorio.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <unordered_set>

#include "qf/halffloat.hpp"

namespace qf {
namespace {

constexpr std::size_t kMinEntryBytes = 4 + 4 + 8 + 4 + 8 + 8;  // empty name, one dim

bool is_q8(TensorFormat f) { return f == TensorFormat::kQ8F16S || f == TensorFormat::kQ8F32S; }

void put_u32(std::vector<std::byte>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::byte>(v >> (8 * i)));
}

void put_u64(std::vector<std::byte>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::byte>(v >> (8 * i)));
}

template <class T>
T get_le(const std::byte* p) {
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(std::to_integer<T>(p[i]) << (8 * i));
  return v;
}

// Element product and container size, or nullopt when either overflows.
std::optional<std::uint64_t> checked_elements(std::span<const std::uint64_t> dims) {
  std::uint64_t n = 1;
  for (std::uint64_t d : dims) {
    if (__builtin_mul_overflow(n, d, &n)) return std::nullopt;
  }
  // container_bytes multiplies by at most 4.
  if (n > (std::uint64_t{1} << 61)) return std::nullopt;
  return n;
}

bool valid_utf8(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    std::size_t len;
    std::uint32_t cp;
    if (c < 0x80) {
      ++i;
      continue;
    } else if ((c & 0xE0) == 0xC0) {
      len = 2;
      cp = c & 0x1F;
    } else if ((c & 0xF0) == 0xE0) {
      len = 3;
      cp = c & 0x0F;
    } else if ((c & 0xF8) == 0xF0) {
      len = 4;
      cp = c & 0x07;
    } else {
      return false;
    }
    if (i + len > s.size()) return false;
    for (std::size_t k = 1; k < len; ++k) {
      const auto cc = static_cast<unsigned char>(s[i + k]);
      if ((cc & 0xC0) != 0x80) return false;
      cp = (cp << 6) | (cc & 0x3F);
    }
    const std::uint32_t min_cp = len == 2 ? 0x80 : len == 3 ? 0x800 : 0x10000;
    if (cp < min_cp || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) return false;
    i += len;
  }
  return true;
}

template <QuantBlock Block>
std::optional<std::string> check_q8_payload(std::span<const std::byte> payload) {
  constexpr std::size_t kBytes = std::same_as<Block, BlockQ8F16S> ? kBlockBytesF16S : kBlockBytesF32S;
  constexpr std::size_t kScaleBytes = kBytes - kBlockSize;
  for (std::size_t off = 0, k = 0; off < payload.size(); off += kBytes, ++k) {
    const std::byte* p = payload.data() + off;
    bool bad_scale;
    if constexpr (std::same_as<Block, BlockQ8F16S>) {
      const auto bits = get_le<std::uint16_t>(p);
      bad_scale = (bits & 0x8000) != 0 || (bits & 0x7C00) == 0x7C00;
    } else {
      const auto bits = get_le<std::uint32_t>(p);
      bad_scale = (bits & 0x80000000u) != 0 || (bits & 0x7F800000u) == 0x7F800000u;
    }
    if (bad_scale) return "block " + std::to_string(k) + " has a negative or non-finite scale";
    for (std::size_t i = 0; i < kBlockSize; ++i) {
      if (p[kScaleBytes + i] == std::byte{0x80}) {
        return "block " + std::to_string(k) + " holds quant -128";
      }
    }
  }
  return std::nullopt;
}

// Shared structural checks; returns a message describing the first problem.
std::optional<std::string> tensor_problem(const std::string& name, std::span<const std::uint64_t> dims,
                                          TensorFormat format, std::uint64_t nbytes) {
  if (name.empty()) return "empty tensor name";
  if (!valid_utf8(name)) return "name is not valid UTF-8";
  if (dims.empty() || dims.size() > kMaxDims) {
    return "rank " + std::to_string(dims.size()) + " outside 1..4";
  }
  if (static_cast<std::uint32_t>(format) > 3) {
    return "unknown format " + std::to_string(static_cast<std::uint32_t>(format));
  }
  for (std::uint64_t d : dims) {
    if (d == 0) return "zero extent";
  }
  const auto n = checked_elements(dims);
  if (!n) return "element count overflows";
  if (is_q8(format) && dims.back() % kBlockSize != 0) {
    return "inner extent " + std::to_string(dims.back()) + " is not a multiple of 32 for " +
           std::string(to_string(format));
  }
  const std::uint64_t expect = container_bytes(*n, format);
  if (nbytes != expect) {
    return "payload is " + std::to_string(nbytes) + " bytes, expected " + std::to_string(expect);
  }
  return std::nullopt;
}

std::optional<std::string> payload_problem(TensorFormat format, std::span<const std::byte> payload) {
  if (format == TensorFormat::kQ8F16S) return check_q8_payload<BlockQ8F16S>(payload);
  if (format == TensorFormat::kQ8F32S) return check_q8_payload<BlockQ8F32S>(payload);
  return std::nullopt;
}

class Reader {
 public:
  explicit Reader(std::span<const std::byte> bytes) : bytes_(bytes) {}

  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

  std::span<const std::byte> take(std::uint64_t n, const std::string& who, const char* what) {
    if (n > remaining()) throw ParseError(who, std::string("truncated ") + what);
    const auto out = bytes_.subspan(pos_, static_cast<std::size_t>(n));
    pos_ += static_cast<std::size_t>(n);
    return out;
  }
  std::uint32_t u32(const std::string& who, const char* what) {
    return get_le<std::uint32_t>(take(4, who, what).data());
  }
  std::uint64_t u64(const std::string& who, const char* what) {
    return get_le<std::uint64_t>(take(8, who, what).data());
  }

 private:
  std::span<const std::byte> bytes_;
  std::size_t pos_ = 0;
};

struct TableEntry {
  QTensor tensor;
  std::uint64_t offset;
  std::uint64_t nbytes;
};

void encode_f32(std::span<const float> v, std::vector<std::byte>& out) {
  out.resize(v.size() * 4);
  for (std::size_t i = 0; i < v.size(); ++i) {
    const auto bits = std::bit_cast<std::uint32_t>(v[i]);
    for (int b = 0; b < 4; ++b) out[4 * i + b] = static_cast<std::byte>(bits >> (8 * b));
  }
}

}  // namespace

std::uint64_t QTensor::n_elements() const {
  const auto n = checked_elements(dims);
  if (!n) throw PreconditionError("tensor '" + name + "': element count overflows");
  return *n;
}

void validate_tensor(const QTensor& t) {
  if (auto p = tensor_problem(t.name, t.dims, t.format, t.payload.size())) {
    throw PreconditionError("tensor '" + t.name + "': " + *p);
  }
  if (auto p = payload_problem(t.format, t.payload)) {
    throw PreconditionError("tensor '" + t.name + "': " + *p);
  }
}

QTensor make_f32_tensor(std::string name, std::vector<std::uint64_t> dims, std::span<const float> values) {
  QTensor t{std::move(name), std::move(dims), TensorFormat::kF32, {}};
  encode_f32(values, t.payload);
  validate_tensor(t);
  return t;
}

QTensor make_f16_tensor(std::string name, std::vector<std::uint64_t> dims, std::span<const float> values) {
  QTensor t{std::move(name), std::move(dims), TensorFormat::kF16, {}};
  t.payload.resize(values.size() * 2);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const std::uint16_t h = f16_encode(values[i]).bits;
    t.payload[2 * i] = static_cast<std::byte>(h);
    t.payload[2 * i + 1] = static_cast<std::byte>(h >> 8);
  }
  validate_tensor(t);
  return t;
}

template <QuantBlock Block>
QTensor make_q8_tensor(std::string name, std::vector<std::uint64_t> dims, std::span<const Block> blocks) {
  QTensor t{std::move(name), std::move(dims), tensor_format_of(kScaleFormatOf<Block>), {}};
  t.payload.resize(blocks.size() * (std::same_as<Block, BlockQ8F16S> ? kBlockBytesF16S : kBlockBytesF32S));
  write_blocks<Block>(blocks, t.payload);
  validate_tensor(t);
  return t;
}

template <QuantBlock Block>
std::vector<Block> tensor_blocks(const QTensor& t) {
  if (t.format != tensor_format_of(kScaleFormatOf<Block>)) {
    throw PreconditionError("tensor '" + t.name + "' is " + std::string(to_string(t.format)) +
                            ", not " + std::string(to_string(tensor_format_of(kScaleFormatOf<Block>))));
  }
  std::vector<Block> blocks(t.n_elements() / kBlockSize);
  read_blocks<Block>(t.payload, blocks);
  return blocks;
}

std::vector<float> tensor_values(const QTensor& t) {
  const std::uint64_t n = t.n_elements();
  if (t.payload.size() != container_bytes(n, t.format)) {
    throw PreconditionError("tensor '" + t.name + "': payload size does not match its shape");
  }
  std::vector<float> out(n);
  switch (t.format) {
    case TensorFormat::kF32:
      for (std::size_t i = 0; i < n; ++i) out[i] = std::bit_cast<float>(get_le<std::uint32_t>(&t.payload[4 * i]));
      break;
    case TensorFormat::kF16:
      for (std::size_t i = 0; i < n; ++i) out[i] = f16_decode(F16Bits{get_le<std::uint16_t>(&t.payload[2 * i])});
      break;
    case TensorFormat::kQ8F16S:
      dequantize_row<BlockQ8F16S>(tensor_blocks<BlockQ8F16S>(t), out);
      break;
    case TensorFormat::kQ8F32S:
      dequantize_row<BlockQ8F32S>(tensor_blocks<BlockQ8F32S>(t), out);
      break;
  }
  return out;
}

std::size_t table_entry_bytes(const QTensor& t) {
  return 4 + t.name.size() + 4 + 8 * t.dims.size() + 4 + 8 + 8;
}

std::vector<std::byte> serialize_model(std::span<const QTensor> tensors) {
  std::unordered_set<std::string_view> names;
  std::size_t table_bytes = 0;
  std::uint64_t payload_bytes = 0;
  for (const QTensor& t : tensors) {
    validate_tensor(t);
    if (!names.insert(t.name).second) throw PreconditionError("duplicate tensor name '" + t.name + "'");
    table_bytes += table_entry_bytes(t);
    payload_bytes += t.payload.size();
  }
  if (tensors.size() > UINT32_MAX) throw PreconditionError("too many tensors");

  std::vector<std::byte> out;
  out.reserve(kModelHeaderBytes + table_bytes + payload_bytes);
  for (char c : kModelMagic) out.push_back(static_cast<std::byte>(c));
  put_u32(out, kModelVersion);
  put_u32(out, static_cast<std::uint32_t>(tensors.size()));
  put_u64(out, kModelHeaderBytes + table_bytes);

  std::uint64_t offset = 0;
  for (const QTensor& t : tensors) {
    put_u32(out, static_cast<std::uint32_t>(t.name.size()));
    for (char c : t.name) out.push_back(static_cast<std::byte>(c));
    put_u32(out, static_cast<std::uint32_t>(t.dims.size()));
    for (std::uint64_t d : t.dims) put_u64(out, d);
    put_u32(out, static_cast<std::uint32_t>(t.format));
    put_u64(out, offset);
    put_u64(out, t.payload.size());
    offset += t.payload.size();
  }
  for (const QTensor& t : tensors) out.insert(out.end(), t.payload.begin(), t.payload.end());
  return out;
}

std::vector<QTensor> parse_model(std::span<const std::byte> bytes) {
  Reader r(bytes);
  const auto magic = r.take(4, "", "header");
  if (std::memcmp(magic.data(), kModelMagic, 4) != 0) throw ParseError("", "bad magic");
  const std::uint32_t version = r.u32("", "header");
  if (version != kModelVersion) throw ParseError("", "unsupported version " + std::to_string(version));
  const std::uint32_t count = r.u32("", "header");
  const std::uint64_t payload_offset = r.u64("", "header");
  if (count > r.remaining() / kMinEntryBytes) {
    throw ParseError("", "tensor count " + std::to_string(count) + " exceeds the file size");
  }

  std::vector<TableEntry> entries;
  entries.reserve(count);
  std::unordered_set<std::string> names;
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string who = "#" + std::to_string(i);
    const std::uint32_t name_len = r.u32(who, "table entry");
    const auto name_bytes = r.take(name_len, who, "tensor name");
    TableEntry e;
    e.tensor.name.assign(reinterpret_cast<const char*>(name_bytes.data()), name_bytes.size());
    if (!e.tensor.name.empty()) who = e.tensor.name;
    const std::uint32_t n_dims = r.u32(who, "table entry");
    if (n_dims == 0 || n_dims > kMaxDims) {
      throw ParseError(who, "rank " + std::to_string(n_dims) + " outside 1..4");
    }
    for (std::uint32_t d = 0; d < n_dims; ++d) e.tensor.dims.push_back(r.u64(who, "dims"));
    const std::uint32_t format = r.u32(who, "table entry");
    if (format > 3) throw ParseError(who, "unknown format " + std::to_string(format));
    e.tensor.format = static_cast<TensorFormat>(format);
    e.offset = r.u64(who, "table entry");
    e.nbytes = r.u64(who, "table entry");
    if (auto p = tensor_problem(e.tensor.name, e.tensor.dims, e.tensor.format, e.nbytes)) {
      throw ParseError(who, *p);
    }
    if (!names.insert(e.tensor.name).second) throw ParseError(who, "duplicate tensor name");
    entries.push_back(std::move(e));
  }

  if (payload_offset < r.pos() || payload_offset > bytes.size()) {
    throw ParseError("", "payload offset " + std::to_string(payload_offset) + " outside [" +
                             std::to_string(r.pos()) + ", " + std::to_string(bytes.size()) + "]");
  }
  const auto payload = bytes.subspan(static_cast<std::size_t>(payload_offset));
  for (const TableEntry& e : entries) {
    if (e.offset > payload.size() || e.nbytes > payload.size() - e.offset) {
      throw ParseError(e.tensor.name, "payload [" + std::to_string(e.offset) + ", +" +
                                          std::to_string(e.nbytes) + ") runs past the end of the file");
    }
  }

  std::vector<const TableEntry*> by_offset;
  for (const TableEntry& e : entries) by_offset.push_back(&e);
  std::sort(by_offset.begin(), by_offset.end(),
            [](const TableEntry* a, const TableEntry* b) { return a->offset < b->offset; });
  for (std::size_t i = 1; i < by_offset.size(); ++i) {
    if (by_offset[i - 1]->offset + by_offset[i - 1]->nbytes > by_offset[i]->offset) {
      throw ParseError(by_offset[i]->tensor.name,
                       "payload overlaps tensor '" + by_offset[i - 1]->tensor.name + "'");
    }
  }

  std::vector<QTensor> out;
  out.reserve(entries.size());
  for (TableEntry& e : entries) {
    const auto bytes_of = payload.subspan(static_cast<std::size_t>(e.offset), static_cast<std::size_t>(e.nbytes));
    if (auto p = payload_problem(e.tensor.format, bytes_of)) throw ParseError(e.tensor.name, *p);
    e.tensor.payload.assign(bytes_of.begin(), bytes_of.end());
    out.push_back(std::move(e.tensor));
  }
  return out;
}

void save_model(std::span<const QTensor> tensors, const std::filesystem::path& path) {
  const auto bytes = serialize_model(tensors);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  f.close();
  if (!f) throw std::runtime_error("write to '" + path.string() + "' failed");
}

std::vector<QTensor> load_model(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open '" + path.string() + "'");
  std::vector<char> raw((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (f.bad()) throw std::runtime_error("read from '" + path.string() + "' failed");
  return parse_model(std::as_bytes(std::span<const char>(raw)));
}

std::vector<QTensor> quantize_tensors(std::span<const QTensor> src, ScaleFormat format, QuantReport* report) {
  QuantReport rep;
  rep.scale_format = format;
  std::vector<QTensor> out;
  out.reserve(src.size());
  for (const QTensor& t : src) {
    if (t.format != TensorFormat::kF32 && t.format != TensorFormat::kF16) {
      throw PreconditionError("tensor '" + t.name + "' is already " + std::string(to_string(t.format)) +
                              ": source must be F32/F16");
    }
    QuantReport::Entry entry{t.name, t.format, t.format, t.payload.size(), t.payload.size(), std::nullopt};
    const bool quantizable = t.dims.size() == 2 && t.dims.back() % kBlockSize == 0;
    if (!quantizable) {
      out.push_back(t);
    } else {
      const std::vector<float> values = tensor_values(t);
      QuantizedRow q;
      try {
        q = quantize_row(values, format);
      } catch (const std::domain_error& e) {
        throw PreconditionError("tensor '" + t.name + "': " + e.what());
      }
      std::visit([&](const auto& blocks) {
        using Block = typename std::decay_t<decltype(blocks)>::value_type;
        out.push_back(make_q8_tensor<Block>(t.name, t.dims, blocks));
      }, q.blocks);
      entry.to = out.back().format;
      entry.bytes_after = out.back().payload.size();
      entry.stats = q.stats;
      rep.quantized_bytes += entry.bytes_after;
    }
    rep.total_bytes_before += entry.bytes_before;
    rep.total_bytes_after += entry.bytes_after;
    rep.entries.push_back(std::move(entry));
  }
  if (report != nullptr) *report = std::move(rep);
  return out;
}

QuantReport quantize_model(const std::filesystem::path& src, ScaleFormat format,
                           const std::filesystem::path& dst) {
  QuantReport report;
  const auto quantized = quantize_tensors(load_model(src), format, &report);
  save_model(quantized, dst);
  return report;
}

template QTensor make_q8_tensor(std::string, std::vector<std::uint64_t>, std::span<const BlockQ8F16S>);
template QTensor make_q8_tensor(std::string, std::vector<std::uint64_t>, std::span<const BlockQ8F32S>);
template std::vector<BlockQ8F16S> tensor_blocks(const QTensor&);
template std::vector<BlockQ8F32S> tensor_blocks(const QTensor&);

}  // namespace qf
