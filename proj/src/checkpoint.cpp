#include "proje/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <vector>

namespace proje {

namespace {

constexpr char kMagic[6] = {'P', 'R', 'O', 'J', 'E', '1'};
constexpr std::size_t kReservedBytes = 10;
constexpr std::size_t kHeaderBytes = sizeof(kMagic) + sizeof(std::uint32_t) + kReservedBytes;
constexpr std::size_t kFlagBytes = 2;
constexpr std::size_t kShapeBytes = 3 * sizeof(std::uint64_t);

// CRC-32 (IEEE, reflected), the same polynomial zlib uses.
std::array<std::uint32_t, 256> make_crc_table() {
  std::array<std::uint32_t, 256> table{};
  for (std::uint32_t i = 0; i < 256; ++i) {
    std::uint32_t c = i;
    for (int bit = 0; bit < 8; ++bit) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
    table[i] = c;
  }
  return table;
}

std::uint32_t crc32(const unsigned char* data, std::size_t n) {
  static const auto table = make_crc_table();
  std::uint32_t crc = 0xFFFFFFFFu;
  for (std::size_t i = 0; i < n; ++i) crc = table[(crc ^ data[i]) & 0xFFu] ^ (crc >> 8);
  return crc ^ 0xFFFFFFFFu;
}

class Writer {
 public:
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<unsigned char>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<unsigned char>(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void raw(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    buf_.insert(buf_.end(), p, p + n);
  }
  const std::vector<unsigned char>& bytes() const { return buf_; }

 private:
  std::vector<unsigned char> buf_;
};

class Reader {
 public:
  Reader(const unsigned char* data, std::size_t n) : data_(data), size_(n) {}
  std::uint8_t u8() { return data_[pos_++]; }
  std::uint32_t u32() {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data_[pos_++]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(data_[pos_++]) << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  void skip(std::size_t n) { pos_ += n; }
  std::size_t pos() const { return pos_; }
  std::size_t size() const { return size_; }

 private:
  const unsigned char* data_;
  std::size_t size_;
  std::size_t pos_ = 0;
};

void write_matrix_rows(Writer& w, const Matrix& m) {
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) w.f64(m(r, c));
  }
}

void write_vector(Writer& w, const Vector& v) {
  for (Index i = 0; i < v.size(); ++i) w.f64(v[i]);
}

void read_matrix_rows(Reader& r, Matrix& m) {
  for (Index row = 0; row < m.rows(); ++row) {
    for (Index col = 0; col < m.cols(); ++col) m(row, col) = r.f64();
  }
}

void read_vector(Reader& r, Vector& v) {
  for (Index i = 0; i < v.size(); ++i) v[i] = r.f64();
}

}  // namespace

std::uint64_t checkpoint_byte_size(std::uint64_t n_entities, std::uint64_t n_relations,
                                   std::uint64_t k) {
  const std::uint64_t scalars = n_entities * k + n_relations * k + 5 * k + 1;
  return kHeaderBytes + kFlagBytes + kShapeBytes + 8 * scalars + 4;
}

void save_checkpoint(const std::filesystem::path& path, const ModelParams& p, Task task,
                     Variant variant) {
  Writer w;
  w.raw(kMagic, sizeof(kMagic));
  w.u32(kCheckpointVersion);
  for (std::size_t i = 0; i < kReservedBytes; ++i) w.u8(0);
  w.u8(task == Task::Entity ? 0 : 1);
  w.u8(variant == Variant::Pointwise ? 0 : variant == Variant::Listwise ? 1 : 2);
  w.u64(static_cast<std::uint64_t>(p.n_entities()));
  w.u64(static_cast<std::uint64_t>(p.n_relations()));
  w.u64(static_cast<std::uint64_t>(p.k()));
  write_matrix_rows(w, p.entity_embeddings);
  write_matrix_rows(w, p.relation_embeddings);
  write_vector(w, p.tail_query_entity_weight);
  write_vector(w, p.tail_query_relation_weight);
  write_vector(w, p.head_query_entity_weight);
  write_vector(w, p.head_query_relation_weight);
  write_vector(w, p.combination_bias);
  w.f64(p.projection_bias);
  const std::uint32_t crc = crc32(w.bytes().data(), w.bytes().size());
  w.u32(crc);

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw CheckpointError(CheckpointError::Kind::Io, "cannot open " + path.string());
  }
  out.write(reinterpret_cast<const char*>(w.bytes().data()),
            static_cast<std::streamsize>(w.bytes().size()));
  if (!out) {
    throw CheckpointError(CheckpointError::Kind::Io, "failed writing " + path.string());
  }
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) {
    throw CheckpointError(CheckpointError::Kind::Io, "cannot open " + path.string());
  }
  const auto file_size = static_cast<std::size_t>(in.tellg());
  in.seekg(0);
  std::vector<unsigned char> bytes(file_size);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(file_size));
  if (!in) {
    throw CheckpointError(CheckpointError::Kind::Io, "failed reading " + path.string());
  }

  const std::size_t min_size = kHeaderBytes + kFlagBytes + kShapeBytes + 4;
  if (file_size < min_size) {
    throw CheckpointError(CheckpointError::Kind::Truncated,
                          path.string() + ": file shorter than the fixed header");
  }
  Reader r(bytes.data(), file_size);
  if (std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw CheckpointError(CheckpointError::Kind::BadMagic,
                          path.string() + ": not a checkpoint (bad magic)");
  }
  r.skip(sizeof(kMagic));
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw CheckpointError(CheckpointError::Kind::BadVersion,
                          path.string() + ": unsupported format version " +
                              std::to_string(version));
  }
  r.skip(kReservedBytes);
  const std::uint8_t task_flag = r.u8();
  const std::uint8_t variant_flag = r.u8();
  if (task_flag > 1) {
    throw CheckpointError(CheckpointError::Kind::BadFlag,
                          path.string() + ": bad task flag " + std::to_string(task_flag));
  }
  if (variant_flag > 2) {
    throw CheckpointError(CheckpointError::Kind::BadFlag,
                          path.string() + ": bad variant flag " + std::to_string(variant_flag));
  }
  const std::uint64_t n_e = r.u64();
  const std::uint64_t n_r = r.u64();
  const std::uint64_t k = r.u64();
  const std::uint64_t expected = checkpoint_byte_size(n_e, n_r, k);
  if (file_size < expected) {
    throw CheckpointError(CheckpointError::Kind::Truncated,
                          path.string() + ": truncated, expected " + std::to_string(expected) +
                              " bytes, found " + std::to_string(file_size));
  }
  if (file_size > expected) {
    throw CheckpointError(CheckpointError::Kind::TrailingData,
                          path.string() + ": trailing data, expected " +
                              std::to_string(expected) + " bytes, found " +
                              std::to_string(file_size));
  }
  Reader crc_reader(bytes.data() + file_size - 4, 4);
  const std::uint32_t stored_crc = crc_reader.u32();
  const std::uint32_t actual_crc = crc32(bytes.data(), file_size - 4);
  if (stored_crc != actual_crc) {
    throw CheckpointError(CheckpointError::Kind::BadCrc, path.string() + ": CRC mismatch");
  }

  LoadedCheckpoint loaded;
  loaded.meta.format_version = version;
  loaded.meta.task = task_flag == 0 ? Task::Entity : Task::Relation;
  loaded.meta.variant = variant_flag == 0   ? Variant::Pointwise
                        : variant_flag == 1 ? Variant::Listwise
                                            : Variant::WeightedListwise;
  loaded.params = ModelParams::zeros(static_cast<Index>(n_e), static_cast<Index>(n_r),
                                     static_cast<Index>(k));
  read_matrix_rows(r, loaded.params.entity_embeddings);
  read_matrix_rows(r, loaded.params.relation_embeddings);
  read_vector(r, loaded.params.tail_query_entity_weight);
  read_vector(r, loaded.params.tail_query_relation_weight);
  read_vector(r, loaded.params.head_query_entity_weight);
  read_vector(r, loaded.params.head_query_relation_weight);
  read_vector(r, loaded.params.combination_bias);
  loaded.params.projection_bias = r.f64();
  return loaded;
}

}  // namespace proje
