#include "igrec/common/binary_io.hpp"

#include <array>
#include <bit>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "igrec/common/error.hpp"

namespace igrec::io {
namespace {

std::array<char, 4> encode_f32(double value) {
  const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(value));
  return {static_cast<char>(bits & 0xff), static_cast<char>((bits >> 8) & 0xff),
          static_cast<char>((bits >> 16) & 0xff), static_cast<char>((bits >> 24) & 0xff)};
}

std::uint32_t decode_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace

void write_f32_le(std::ostream& out, std::span<const double> values) {
  std::vector<char> buffer;
  buffer.reserve(values.size() * 4);
  for (double v : values) {
    const auto bytes = encode_f32(v);
    buffer.insert(buffer.end(), bytes.begin(), bytes.end());
  }
  out.write(buffer.data(), static_cast<std::streamsize>(buffer.size()));
}

void write_f32_le(std::ostream& out, const Eigen::MatrixXd& m, bool row_major) {
  std::vector<double> flat;
  flat.reserve(static_cast<std::size_t>(m.size()));
  if (row_major) {
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) flat.push_back(m(r, c));
  } else {
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      for (Eigen::Index r = 0; r < m.rows(); ++r) flat.push_back(m(r, c));
  }
  write_f32_le(out, flat);
}

std::vector<double> read_f32_le(std::istream& in, std::size_t count) {
  std::vector<unsigned char> buffer(count * 4);
  in.read(reinterpret_cast<char*>(buffer.data()), static_cast<std::streamsize>(buffer.size()));
  if (static_cast<std::size_t>(in.gcount()) != buffer.size()) {
    throw LoadError("truncated f32 blob: expected " + std::to_string(count) + " values, got " +
                    std::to_string(in.gcount() / 4));
  }
  std::vector<double> values(count);
  for (std::size_t i = 0; i < count; ++i) {
    values[i] = static_cast<double>(std::bit_cast<float>(decode_u32(&buffer[i * 4])));
  }
  return values;
}

void write_u32_le(std::ostream& out, std::uint32_t value) {
  const char bytes[4] = {static_cast<char>(value & 0xff), static_cast<char>((value >> 8) & 0xff),
                         static_cast<char>((value >> 16) & 0xff),
                         static_cast<char>((value >> 24) & 0xff)};
  out.write(bytes, 4);
}

std::uint32_t read_u32_le(std::istream& in) {
  unsigned char bytes[4];
  in.read(reinterpret_cast<char*>(bytes), 4);
  if (in.gcount() != 4) throw LoadError("truncated u32 field");
  return decode_u32(bytes);
}

void save_f32_matrix(const std::filesystem::path& path, const Eigen::MatrixXd& columns_as_rows) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open for writing: " + path.string());
  // Column-major traversal of the Eigen matrix == row-major file of its transpose.
  write_f32_le(out, columns_as_rows, /*row_major=*/false);
  if (!out) throw Error("write failed: " + path.string());
}

Eigen::MatrixXd load_f32_matrix(const std::filesystem::path& path, std::size_t rows,
                                std::size_t cols) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("missing file: " + path.string());
  const auto expected = static_cast<std::uintmax_t>(rows * cols * 4);
  const auto actual = std::filesystem::file_size(path);
  if (actual != expected) {
    throw LoadError(path.string() + ": size " + std::to_string(actual) + " bytes, expected " +
                    std::to_string(expected) + " (" + std::to_string(rows) + " rows x " +
                    std::to_string(cols) + " f32)");
  }
  const auto values = read_f32_le(in, rows * cols);
  Eigen::MatrixXd m(static_cast<Eigen::Index>(cols), static_cast<Eigen::Index>(rows));
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c)
      m(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(r)) = values[r * cols + c];
  return m;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("missing file: " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open for writing: " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw Error("write failed: " + path.string());
}

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed) {
  std::uint64_t hash = seed;
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

std::uint64_t fnv1a64_file(const std::filesystem::path& path) {
  return fnv1a64(read_text_file(path));
}

std::string hex64(std::uint64_t value) {
  char buffer[17];
  std::snprintf(buffer, sizeof buffer, "%016llx", static_cast<unsigned long long>(value));
  return buffer;
}

Eigen::MatrixXd quantize_f32(const Eigen::MatrixXd& m) {
  return m.unaryExpr([](double v) { return static_cast<double>(static_cast<float>(v)); });
}

}  // namespace igrec::io
