#include "vcnf/checkpoint.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

namespace vcnf {

static_assert(std::endian::native == std::endian::little, "checkpoint format assumes a little-endian host");

namespace fs = std::filesystem;

nlohmann::json architecture_to_json(const Architecture& a) {
  return {{"dim", a.dim},
          {"layers", a.layers},
          {"hidden", a.hidden},
          {"bins", a.spline.bins},
          {"bound", a.spline.bound},
          {"min_bin_fraction", a.spline.min_bin_fraction},
          {"min_derivative", a.spline.min_derivative},
          {"horizon", a.horizon},
          {"activation", "tanh"}};
}

Architecture architecture_from_json(const nlohmann::json& j) {
  try {
    Architecture a;
    a.dim = j.at("dim").get<int>();
    a.layers = j.at("layers").get<int>();
    a.hidden = j.at("hidden").get<std::vector<int>>();
    a.spline.bins = j.at("bins").get<int>();
    a.spline.bound = j.at("bound").get<double>();
    a.spline.min_bin_fraction = j.at("min_bin_fraction").get<double>();
    a.spline.min_derivative = j.at("min_derivative").get<double>();
    a.horizon = j.at("horizon").get<double>();
    if (j.at("activation").get<std::string>() != "tanh") throw DecodeError("checkpoint: unknown activation");
    a.validate();
    return a;
  } catch (const nlohmann::json::exception& e) {
    throw DecodeError(std::string("checkpoint: bad architecture: ") + e.what());
  } catch (const ConfigError& e) {
    throw DecodeError(std::string("checkpoint: bad architecture: ") + e.what());
  }
}

void save_checkpoint(const fs::path& stem, const FlowModel& m, int step, const nlohmann::json& meta) {
  if (stem.has_parent_path()) fs::create_directories(stem.parent_path());
  const auto p = m.params();
  {
    std::ofstream bin(fs::path(stem).concat(".bin"), std::ios::binary | std::ios::trunc);
    bin.write(reinterpret_cast<const char*>(p.data()), static_cast<std::streamsize>(p.size() * sizeof(double)));
    if (!bin) throw std::runtime_error("checkpoint: write failed for " + stem.string());
  }
  nlohmann::json j{{"format", "vcnf-checkpoint-1"},
                   {"architecture", architecture_to_json(m.arch())},
                   {"n_params", p.size()},
                   {"step", step},
                   {"meta", meta}};
  std::ofstream js(fs::path(stem).concat(".json"), std::ios::trunc);
  js << j.dump(2) << '\n';
  if (!js) throw std::runtime_error("checkpoint: write failed for " + stem.string());
}

Checkpoint load_checkpoint(const fs::path& stem) {
  const auto js_path = fs::path(stem).concat(".json");
  const auto bin_path = fs::path(stem).concat(".bin");
  std::ifstream js(js_path);
  if (!js) throw DecodeError("checkpoint: cannot open " + js_path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(js);
  } catch (const nlohmann::json::exception& e) {
    throw DecodeError("checkpoint: " + js_path.string() + ": " + e.what());
  }
  if (j.value("format", "") != "vcnf-checkpoint-1") throw DecodeError("checkpoint: unknown format");
  const Architecture arch = architecture_from_json(j.at("architecture"));
  const auto n = j.at("n_params").get<std::size_t>();

  std::ifstream bin(bin_path, std::ios::binary | std::ios::ate);
  if (!bin) throw DecodeError("checkpoint: cannot open " + bin_path.string());
  if (static_cast<std::size_t>(bin.tellg()) != n * sizeof(double))
    throw DecodeError("checkpoint: " + bin_path.string() + " size does not match n_params");
  bin.seekg(0);
  std::vector<double> p(n);
  bin.read(reinterpret_cast<char*>(p.data()), static_cast<std::streamsize>(n * sizeof(double)));
  for (double v : p)
    if (!std::isfinite(v)) throw DecodeError("checkpoint: non-finite parameter");

  FlowModel m(arch, std::uint64_t{0});
  if (m.n_params() != n) throw DecodeError("checkpoint: n_params does not match architecture");
  m.set_params(std::move(p));
  return {std::move(m), j.value("step", 0), j.value("meta", nlohmann::json::object())};
}

}  // namespace vcnf
