#include "igrec/nn/checkpoint.hpp"

#include <sstream>

#include <nlohmann/json.hpp>

#include "igrec/common/binary_io.hpp"
#include "igrec/common/error.hpp"

namespace igrec::nn {
namespace {

using nlohmann::json;

std::string frame(const json& header, const std::string& blob) {
  std::ostringstream out(std::ios::binary);
  const std::string text = header.dump();
  io::write_u32_le(out, static_cast<std::uint32_t>(text.size()));
  out << text << blob;
  return out.str();
}

struct Framed {
  json header;
  std::istringstream blob;
};

Framed unframe(const std::string& bytes, const std::string& origin, const char* kind) {
  std::istringstream in(bytes, std::ios::binary);
  std::uint32_t length = 0;
  try {
    length = io::read_u32_le(in);
  } catch (const LoadError&) {
    throw LoadError(origin + ": not a checkpoint (too short)");
  }
  if (length > bytes.size() - 4) throw LoadError(origin + ": header length exceeds file size");
  Framed framed;
  try {
    framed.header = json::parse(bytes.substr(4, length));
  } catch (const json::exception& e) {
    throw LoadError(origin + ": malformed checkpoint header: " + e.what());
  }
  if (framed.header.value("format", "") != "igrec-nn") throw LoadError(origin + ": unknown checkpoint format");
  if (framed.header.value("version", 0) != kCheckpointVersion) {
    throw LoadError(origin + ": unsupported checkpoint version " + framed.header.value("version", json()).dump());
  }
  if (framed.header.value("kind", "") != kind) {
    throw LoadError(origin + ": expected a '" + std::string(kind) + "' checkpoint, found '" +
                    framed.header.value("kind", "") + "'");
  }
  framed.blob = std::istringstream(bytes.substr(4 + length), std::ios::binary);
  return framed;
}

Eigen::MatrixXd read_matrix(std::istream& in, Eigen::Index rows, Eigen::Index cols) {
  const auto values = io::read_f32_le(in, static_cast<std::size_t>(rows * cols));
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = values[static_cast<std::size_t>(r * cols + c)];
  return m;
}

void expect_consumed(std::istream& in, const std::string& origin) {
  if (in.peek() != std::char_traits<char>::eof()) throw LoadError(origin + ": trailing bytes after parameter blob");
}

}  // namespace

std::string encode_mlp(const Mlp& mlp) {
  json layers = json::array();
  std::ostringstream blob(std::ios::binary);
  for (const auto& layer : mlp.layers()) {
    layers.push_back({{"in", layer.in_dim()}, {"out", layer.out_dim()}, {"activation", to_string(layer.activation)}});
    io::write_f32_le(blob, layer.weights, /*row_major=*/true);
    io::write_f32_le(blob, Eigen::MatrixXd(layer.bias), true);
  }
  const json header = {{"format", "igrec-nn"}, {"version", kCheckpointVersion}, {"kind", "mlp"}, {"layers", layers}};
  return frame(header, blob.str());
}

Mlp decode_mlp(const std::string& bytes, const std::string& origin) {
  auto framed = unframe(bytes, origin, "mlp");
  std::vector<DenseLayer> layers;
  try {
    for (const auto& spec : framed.header.at("layers")) {
      const auto in = spec.at("in").get<Eigen::Index>();
      const auto out = spec.at("out").get<Eigen::Index>();
      if (in <= 0 || out <= 0) throw LoadError(origin + ": non-positive layer dimension");
      DenseLayer layer;
      layer.activation = activation_from_string(spec.at("activation").get<std::string>());
      layer.weights = read_matrix(framed.blob, out, in);
      layer.bias = read_matrix(framed.blob, out, 1).col(0);
      layers.push_back(std::move(layer));
    }
  } catch (const json::exception& e) {
    throw LoadError(origin + ": malformed layer spec: " + e.what());
  } catch (const LoadError& e) {
    throw LoadError(origin + ": " + e.what());
  }
  expect_consumed(framed.blob, origin);
  try {
    return Mlp(std::move(layers));
  } catch (const ShapeError& e) {
    throw LoadError(origin + ": " + e.what());
  }
}

void save_mlp(const Mlp& mlp, const std::filesystem::path& path) { io::write_text_file(path, encode_mlp(mlp)); }

Mlp load_mlp(const std::filesystem::path& path) { return decode_mlp(io::read_text_file(path), path.string()); }

std::string encode_lstm(const LstmCell& cell) {
  std::ostringstream blob(std::ios::binary);
  io::write_f32_le(blob, cell.w_input, true);
  io::write_f32_le(blob, cell.w_hidden, true);
  io::write_f32_le(blob, Eigen::MatrixXd(cell.bias), true);
  const json header = {{"format", "igrec-nn"},
                       {"version", kCheckpointVersion},
                       {"kind", "lstm"},
                       {"input_dim", cell.input_dim()},
                       {"hidden_dim", cell.hidden_dim()}};
  return frame(header, blob.str());
}

LstmCell decode_lstm(const std::string& bytes, const std::string& origin) {
  auto framed = unframe(bytes, origin, "lstm");
  LstmCell cell;
  try {
    const auto in = framed.header.at("input_dim").get<Eigen::Index>();
    const auto hidden = framed.header.at("hidden_dim").get<Eigen::Index>();
    if (in <= 0 || hidden <= 0) throw LoadError("non-positive LSTM dimension");
    cell.w_input = read_matrix(framed.blob, 4 * hidden, in);
    cell.w_hidden = read_matrix(framed.blob, 4 * hidden, hidden);
    cell.bias = read_matrix(framed.blob, 4 * hidden, 1).col(0);
  } catch (const json::exception& e) {
    throw LoadError(origin + ": malformed LSTM header: " + e.what());
  } catch (const LoadError& e) {
    throw LoadError(origin + ": " + e.what());
  }
  expect_consumed(framed.blob, origin);
  return cell;
}

void save_lstm(const LstmCell& cell, const std::filesystem::path& path) {
  io::write_text_file(path, encode_lstm(cell));
}

LstmCell load_lstm(const std::filesystem::path& path) { return decode_lstm(io::read_text_file(path), path.string()); }

}  // namespace igrec::nn
