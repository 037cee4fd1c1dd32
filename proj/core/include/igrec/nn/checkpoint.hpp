#pragma once

#include <filesystem>
#include <string>

#include "igrec/nn/lstm.hpp"
#include "igrec/nn/mlp.hpp"

namespace igrec::nn {

// Checkpoint layout:
//   u32 little-endian header length | header JSON | little-endian f32 blob
// MLP header: {"format":"igrec-nn","version":1,"kind":"mlp",
//              "layers":[{"in":..,"out":..,"activation":".."}, ...]}
// blob: for each layer in order, weights row-major then bias.
// LSTM header: {..., "kind":"lstm","input_dim":..,"hidden_dim":..}
// blob: w_input row-major, w_hidden row-major, bias.
//
// Parameters are held as f64 in memory and narrowed to f32 on disk.

inline constexpr int kCheckpointVersion = 1;

std::string encode_mlp(const Mlp& mlp);
Mlp decode_mlp(const std::string& bytes, const std::string& origin = "<memory>");
void save_mlp(const Mlp& mlp, const std::filesystem::path& path);
Mlp load_mlp(const std::filesystem::path& path);

std::string encode_lstm(const LstmCell& cell);
LstmCell decode_lstm(const std::string& bytes, const std::string& origin = "<memory>");
void save_lstm(const LstmCell& cell, const std::filesystem::path& path);
LstmCell load_lstm(const std::filesystem::path& path);

}  // namespace igrec::nn
