#include "ccr/diff/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <fstream>

#include <nlohmann/json.hpp>

#include "ccr/common.hpp"

namespace ccr::diff {

namespace {

constexpr int kFormatVersion = 1;

void put_f64_le(std::ostream& out, double d) {
  const std::uint64_t bits = std::bit_cast<std::uint64_t>(d);
  char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
  out.write(bytes, 8);
}

double get_f64_le(std::istream& in) {
  char bytes[8];
  in.read(bytes, 8);
  if (!in) throw DataError("checkpoint payload truncated");
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) {
    bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[i])) << (8 * i);
  }
  return std::bit_cast<double>(bits);
}

}  // namespace

void save_checkpoint(const std::string& path, const ParamStore& store,
                     const nlohmann::json& meta) {
  nlohmann::json header;
  header["format_version"] = kFormatVersion;
  header["meta"] = meta;
  auto tensors = nlohmann::json::array();
  for (std::size_t i = 0; i < store.size(); ++i) {
    const auto& e = store.entry(i);
    nlohmann::json t;
    t["name"] = e.name;
    t["shape"] = e.shape.rank == 1 ? nlohmann::json::array({e.shape.rows})
                                   : nlohmann::json::array({e.shape.rows, e.shape.cols});
    t["trainable"] = e.trainable;
    tensors.push_back(std::move(t));
  }
  header["tensors"] = std::move(tensors);

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open checkpoint for writing: " + path);
  out << header.dump() << '\n';
  for (std::size_t i = 0; i < store.size(); ++i) {
    for (double d : store.entry(i).value) put_f64_le(out, d);
  }
  if (!out) throw DataError("checkpoint write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path);
  std::string header_line;
  if (!std::getline(in, header_line)) throw DataError("checkpoint missing header: " + path);

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(header_line);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("checkpoint header is not valid JSON: " + std::string(e.what()));
  }
  if (!header.contains("format_version") || header["format_version"].get<int>() != kFormatVersion) {
    throw DataError("unsupported checkpoint format version in " + path);
  }

  Checkpoint ckpt;
  ckpt.meta_json = header.value("meta", nlohmann::json::object()).dump();
  for (const auto& t : header.at("tensors")) {
    const std::string name = t.at("name").get<std::string>();
    const auto dims = t.at("shape").get<std::vector<std::size_t>>();
    Shape shape;
    if (dims.size() == 1) {
      shape = Shape::vec(dims[0]);
    } else if (dims.size() == 2) {
      shape = Shape::mat(dims[0], dims[1]);
    } else {
      throw DataError("checkpoint tensor " + name + " has unsupported rank");
    }
    std::vector<double> values(shape.numel());
    for (auto& d : values) d = get_f64_le(in);
    ckpt.params.add(name, shape, std::move(values), t.value("trainable", true));
  }
  return ckpt;
}

}  // namespace ccr::diff
