#include "guidecap/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>

#include <nlohmann/json.hpp>

namespace guidecap::numeric {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string blob_name(const std::string& prefix) {
  return std::filesystem::path(prefix + ".bin").filename().string();
}

void write_f32_le(std::ofstream& out, float f) {
  std::uint32_t u = 0;
  std::memcpy(&u, &f, 4);
  const unsigned char b[4] = {static_cast<unsigned char>(u & 0xff),
                              static_cast<unsigned char>((u >> 8) & 0xff),
                              static_cast<unsigned char>((u >> 16) & 0xff),
                              static_cast<unsigned char>((u >> 24) & 0xff)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

float read_f32_le(const unsigned char* b) {
  const std::uint32_t u = static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
                          (static_cast<std::uint32_t>(b[2]) << 16) |
                          (static_cast<std::uint32_t>(b[3]) << 24);
  float f = 0.0f;
  std::memcpy(&f, &u, 4);
  return f;
}

}  // namespace

void save_checkpoint(const std::string& prefix, const std::vector<const Param*>& tensors) {
  ordered_json manifest;
  manifest["format"] = "guidecap-checkpoint";
  manifest["version"] = 1;
  manifest["dtype"] = "float32";
  manifest["byte_order"] = "little";
  manifest["blob"] = blob_name(prefix);
  ordered_json entries = ordered_json::array();
  std::size_t offset = 0;
  for (const Param* p : tensors) {
    ordered_json e;
    e["name"] = p->name;
    e["shape"] = p->value.shape();
    e["offset"] = offset;
    e["nbytes"] = p->value.numel() * 4;
    entries.push_back(std::move(e));
    offset += p->value.numel() * 4;
  }
  manifest["tensors"] = std::move(entries);

  std::ofstream mf(prefix + ".json", std::ios::binary);
  if (!mf) throw DataError("cannot write checkpoint manifest " + prefix + ".json");
  mf << manifest.dump(2) << "\n";
  mf.close();
  if (!mf) throw DataError("failed writing checkpoint manifest " + prefix + ".json");

  std::ofstream bf(prefix + ".bin", std::ios::binary);
  if (!bf) throw DataError("cannot write checkpoint blob " + prefix + ".bin");
  for (const Param* p : tensors) {
    for (std::size_t i = 0; i < p->value.numel(); ++i) {
      write_f32_le(bf, static_cast<float>(p->value.data()[i]));
    }
  }
  bf.close();
  if (!bf) throw DataError("failed writing checkpoint blob " + prefix + ".bin");
}

std::vector<std::pair<std::string, Array>> load_checkpoint(const std::string& prefix) {
  std::ifstream mf(prefix + ".json", std::ios::binary);
  if (!mf) throw DataError("cannot open checkpoint manifest " + prefix + ".json");
  ordered_json manifest;
  try {
    mf >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(prefix + ".json: " + e.what());
  }
  if (manifest.value("format", "") != "guidecap-checkpoint") {
    throw ParseError(prefix + ".json: not a checkpoint manifest");
  }
  if (manifest.value("dtype", "") != "float32" || manifest.value("byte_order", "") != "little") {
    throw ParseError(prefix + ".json: unsupported dtype or byte order");
  }

  const std::filesystem::path blob_path =
      std::filesystem::path(prefix + ".json").parent_path() / manifest.at("blob").get<std::string>();
  std::ifstream bf(blob_path, std::ios::binary);
  if (!bf) throw DataError("cannot open checkpoint blob " + blob_path.string());
  std::vector<unsigned char> blob((std::istreambuf_iterator<char>(bf)), std::istreambuf_iterator<char>());

  std::vector<std::pair<std::string, Array>> out;
  for (const auto& e : manifest.at("tensors")) {
    const std::string name = e.at("name").get<std::string>();
    const std::vector<int> shape = e.at("shape").get<std::vector<int>>();
    const std::size_t offset = e.at("offset").get<std::size_t>();
    Array a = Array::zeros(shape);
    if (offset + a.numel() * 4 > blob.size()) {
      throw ParseError(prefix + ".json: tensor '" + name + "' extends past end of blob");
    }
    for (std::size_t i = 0; i < a.numel(); ++i) {
      a.data()[i] = static_cast<double>(read_f32_le(blob.data() + offset + i * 4));
    }
    out.emplace_back(name, std::move(a));
  }
  return out;
}

void load_checkpoint_into(const std::string& prefix, const std::vector<Param*>& params) {
  auto loaded = load_checkpoint(prefix);
  std::map<std::string, Array*> by_name;
  for (auto& [name, arr] : loaded) by_name[name] = &arr;
  if (by_name.size() != params.size()) {
    throw DataError("checkpoint " + prefix + " holds " + std::to_string(by_name.size()) +
                    " tensors, expected " + std::to_string(params.size()));
  }
  for (Param* p : params) {
    auto it = by_name.find(p->name);
    if (it == by_name.end()) throw DataError("checkpoint " + prefix + " is missing tensor '" + p->name + "'");
    if (!(it->second->shape() == p->value.shape())) {
      throw DataError("checkpoint tensor '" + p->name + "' shape " + shape_str(it->second->shape()) +
                      " does not match expected " + shape_str(p->value.shape()));
    }
    p->value = std::move(*it->second);
  }
}

}  // namespace guidecap::numeric
