#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace igrec::io {

/// Appends little-endian IEEE-754 binary32 values regardless of host order.
void write_f32_le(std::ostream& out, std::span<const double> values);
void write_f32_le(std::ostream& out, const Eigen::MatrixXd& m, bool row_major = true);

/// Reads `count` little-endian binary32 values, widened to double.
std::vector<double> read_f32_le(std::istream& in, std::size_t count);

void write_u32_le(std::ostream& out, std::uint32_t value);
std::uint32_t read_u32_le(std::istream& in);

/// Writes a rows x cols row-major f32 matrix file. `columns_as_rows` treats each
/// Eigen column as one stored row (the layout used for feature tables).
void save_f32_matrix(const std::filesystem::path& path, const Eigen::MatrixXd& columns_as_rows);

/// Loads a row-major f32 file holding `rows` rows of `cols` values; returns cols x rows.
Eigen::MatrixXd load_f32_matrix(const std::filesystem::path& path, std::size_t rows, std::size_t cols);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::uint64_t fnv1a64_file(const std::filesystem::path& path);
std::string hex64(std::uint64_t value);

/// Rounds each entry through binary32, the precision every on-disk tensor has.
Eigen::MatrixXd quantize_f32(const Eigen::MatrixXd& m);

}  // namespace igrec::io
