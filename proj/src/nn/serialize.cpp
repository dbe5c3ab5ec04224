#include "udkit/nn/serialize.hpp"

#include <bit>
#include <cstdint>
#include <fstream>

#include "udkit/error.hpp"

static_assert(std::endian::native == std::endian::little,
              "model files are little-endian");

namespace udkit::nn {

namespace {

constexpr char kMagic[4] = {'U', 'D', 'K', 'M'};
constexpr uint32_t kVersion = 1;

void write_u32(std::ostream& out, uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void write_u64(std::ostream& out, uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

uint32_t read_u32(std::istream& in) {
  uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}

uint64_t read_u64(std::istream& in) {
  uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}

nlohmann::json open_and_parse_header(std::ifstream& in, const std::string& path) {
  if (!in) throw DataError("cannot open model file " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw DataError(path + " is not a model file");
  uint32_t version = read_u32(in);
  if (version != kVersion)
    throw DataError(path + ": unsupported model version " + std::to_string(version));
  uint64_t len = read_u64(in);
  std::string buf(len, '\0');
  in.read(buf.data(), static_cast<std::streamsize>(len));
  if (!in) throw DataError(path + ": truncated model header");
  return nlohmann::json::parse(buf);
}

}  // namespace

void save_model(const std::string& path, const ModelHeader& header,
                const ParamCollection& pc) {
  nlohmann::json j;
  j["type"] = header.type;
  j["hparams"] = header.hparams;
  j["vocabs"] = header.vocabs;
  nlohmann::json arrays = nlohmann::json::array();
  for (const Param* p : pc.all())
    arrays.push_back({{"name", p->name}, {"rows", p->rows()}, {"cols", p->cols()}});
  j["arrays"] = arrays;
  std::string hdr = j.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write model file " + path);
  out.write(kMagic, 4);
  write_u32(out, kVersion);
  write_u64(out, hdr.size());
  out.write(hdr.data(), static_cast<std::streamsize>(hdr.size()));
  for (const Param* p : pc.all())
    out.write(reinterpret_cast<const char*>(p->value.data()),
              static_cast<std::streamsize>(sizeof(double) * p->value.size()));
  if (!out) throw DataError("short write on model file " + path);
}

ModelHeader read_model_header(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  nlohmann::json j = open_and_parse_header(in, path);
  ModelHeader h;
  h.type = j.at("type").get<std::string>();
  h.hparams = j.value("hparams", nlohmann::json::object());
  if (j.contains("vocabs"))
    h.vocabs = j["vocabs"].get<std::map<std::string, std::vector<std::string>>>();
  return h;
}

void load_model_values(const std::string& path, ParamCollection& pc) {
  std::ifstream in(path, std::ios::binary);
  nlohmann::json j = open_and_parse_header(in, path);
  const auto& arrays = j.at("arrays");
  auto params = pc.all();
  if (arrays.size() != params.size())
    throw DataError(path + ": model has " + std::to_string(arrays.size()) +
                    " arrays, collection expects " + std::to_string(params.size()));
  for (size_t i = 0; i < params.size(); ++i) {
    const auto& a = arrays[i];
    Param* p = params[i];
    if (a.at("name").get<std::string>() != p->name ||
        a.at("rows").get<int>() != p->rows() || a.at("cols").get<int>() != p->cols())
      throw DataError(path + ": array " + std::to_string(i) + " (" +
                      a.at("name").get<std::string>() + ") does not match parameter " +
                      p->name);
    in.read(reinterpret_cast<char*>(p->value.data()),
            static_cast<std::streamsize>(sizeof(double) * p->value.size()));
    if (!in) throw DataError(path + ": truncated array data");
  }
}

}  // namespace udkit::nn
