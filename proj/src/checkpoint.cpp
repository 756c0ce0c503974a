#include <evikit/checkpoint.hpp>

#include <evikit/binary_io.hpp>
#include <evikit/config.hpp>
#include <evikit/errors.hpp>

#include <map>

namespace evikit {

namespace {
constexpr std::string_view kRwt1Magic = "RWT1";
}

std::vector<std::uint8_t> encode_rwt1(const WeightFile& file)
{
  io::ByteWriter w;
  w.bytes(kRwt1Magic);
  const std::string cfg = file.config.dump();
  w.u32(static_cast<std::uint32_t>(cfg.size()));
  w.bytes(cfg);
  for (const auto& a : file.arrays) {
    std::size_t expected = 1;
    for (auto d : a.shape)
      expected *= d;
    if (expected != a.data.size())
      throw ValidationError("array '" + a.name + "' data length does not match its shape");
    w.u32(static_cast<std::uint32_t>(a.name.size()));
    w.bytes(a.name);
    w.u32(static_cast<std::uint32_t>(a.shape.size()));
    for (auto d : a.shape)
      w.u32(d);
    for (float v : a.data)
      w.f32(v);
  }
  return w.buffer();
}

WeightFile decode_rwt1(std::span<const std::uint8_t> bytes)
{
  io::ByteReader r(bytes);
  if (r.bytes(std::min<std::size_t>(4, bytes.size()), "magic") != kRwt1Magic)
    throw FormatError("bad magic, expected \"RWT1\"", 0);
  const std::uint32_t cfg_len = r.u32("config length");
  const std::uint64_t cfg_offset = r.offset();
  const std::string cfg = r.bytes(cfg_len, "config JSON");
  WeightFile file;
  file.config = nlohmann::json::parse(cfg, nullptr, false);
  if (file.config.is_discarded())
    throw FormatError("config block is not valid JSON", cfg_offset);
  while (!r.at_end()) {
    const std::uint64_t start = r.offset();
    NamedArray a;
    const std::uint32_t name_len = r.u32("array name length");
    a.name = r.bytes(name_len, "array name");
    const std::uint32_t rank = r.u32("array rank");
    if (rank > 8)
      throw FormatError("array '" + a.name + "' has implausible rank " + std::to_string(rank), start);
    std::uint64_t count = 1;
    for (std::uint32_t k = 0; k < rank; ++k) {
      a.shape.push_back(r.u32("array dim"));
      count *= a.shape.back();
    }
    if (count > r.remaining() / 4)
      throw FormatError("array '" + a.name + "' is truncated", r.offset());
    a.data.resize(count);
    for (auto& v : a.data)
      v = r.f32("array data");
    file.arrays.push_back(std::move(a));
  }
  return file;
}

WeightFile weights_from_model(const Refid& model)
{
  WeightFile file;
  file.config = to_json(model.config());
  for (const auto& p : model.parameters()) {
    NamedArray a;
    a.name = p.name;
    for (auto d : p.tensor.shape())
      a.shape.push_back(static_cast<std::uint32_t>(d));
    a.data.reserve(p.tensor.numel());
    for (double v : p.tensor.data())
      a.data.push_back(static_cast<float>(v));
    file.arrays.push_back(std::move(a));
  }
  return file;
}

Refid model_from_weights(const WeightFile& file)
{
  RefidConfig cfg;
  try {
    cfg = refid_config_from_json(file.config, "/config");
  } catch (const ValidationError& e) {
    throw FormatError(std::string("weight file config: ") + e.what(), 4);
  }
  Refid model(cfg);
  std::map<std::string, const NamedArray*> by_name;
  for (const auto& a : file.arrays)
    if (!by_name.emplace(a.name, &a).second)
      throw FormatError("duplicate array '" + a.name + "'", 0);
  auto params = model.parameters();
  if (params.size() != by_name.size())
    throw FormatError("weight file has " + std::to_string(by_name.size()) + " arrays, model expects " +
                          std::to_string(params.size()),
                      0);
  for (auto& p : params) {
    auto it = by_name.find(p.name);
    if (it == by_name.end())
      throw FormatError("weight file lacks array '" + p.name + "'", 0);
    const NamedArray& a = *it->second;
    nn::Shape shape(a.shape.begin(), a.shape.end());
    if (shape != p.tensor.shape())
      throw FormatError("array '" + p.name + "' has shape " + nn::to_string(shape) + ", model expects " +
                            nn::to_string(p.tensor.shape()),
                        0);
    auto dst = p.tensor.data();
    for (std::size_t i = 0; i < dst.size(); ++i)
      dst[i] = a.data[i];
  }
  return model;
}

void save_weights(const Refid& model, const std::filesystem::path& path)
{
  io::write_file_atomic(path, encode_rwt1(weights_from_model(model)));
}

Refid load_weights(const std::filesystem::path& path)
{
  return model_from_weights(decode_rwt1(io::read_file(path)));
}

} // namespace evikit
