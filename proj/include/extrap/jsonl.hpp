#pragma once

#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "extrap/chain.hpp"
#include "extrap/errors.hpp"
#include "json.hpp"

namespace extrap {

// Provenance header written as the first line of every jsonl artifact.
struct ArtifactHeader {
  std::string kind;
  std::string config_hash;
  std::uint64_t seed = 0;

  nlohmann::json to_json() const {
    return {{"v", 1}, {"header", kind}, {"config", config_hash}, {"seed", seed}};
  }
  static ArtifactHeader from_json(const nlohmann::json& j) {
    ArtifactHeader h;
    h.kind = j.at("header").get<std::string>();
    h.config_hash = j.at("config").get<std::string>();
    h.seed = j.at("seed").get<std::uint64_t>();
    return h;
  }
};

// FNV-1a 64, used for config hashes; stable across platforms.
inline std::string fnv1a_hex(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline nlohmann::json chain_to_json(const ChainRecord& c) {
  return {{"v", 1},        {"task", c.task},         {"seed", c.seed},
          {"states", c.states}, {"scores", c.scores}, {"accepted", c.accepted},
          {"proposal", c.proposal}};
}

inline ChainRecord chain_from_json(const nlohmann::json& j) {
  if (j.value("v", 0) != 1) throw StructuralError("chain record: bad schema version");
  ChainRecord c;
  c.task = j.at("task").get<std::string>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.states = j.at("states").get<std::vector<TokenSeq>>();
  c.scores = j.at("scores").get<std::vector<double>>();
  c.accepted = j.at("accepted").get<std::vector<bool>>();
  c.proposal = j.at("proposal");
  c.validate();
  return c;
}

inline nlohmann::json episode_to_json(const Episode& e) {
  return {{"v", 1}, {"strategy", e.strategy}, {"states", e.states}, {"scores", e.scores}};
}

inline Episode episode_from_json(const nlohmann::json& j) {
  if (j.value("v", 0) != 1) throw StructuralError("episode record: bad schema version");
  Episode e;
  e.strategy = j.at("strategy").get<std::string>();
  e.states = j.at("states").get<std::vector<TokenSeq>>();
  e.scores = j.at("scores").get<std::vector<double>>();
  e.validate();
  return e;
}

template <typename T, typename ToJson>
void write_jsonl(const std::string& path, const ArtifactHeader& header,
                 const std::vector<T>& records, ToJson to_json) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ArtifactError("cannot open for writing: " + path);
  out << header.to_json().dump() << "\n";
  for (const auto& r : records) out << to_json(r).dump() << "\n";
  if (!out) throw ArtifactError("write failed: " + path);
}

template <typename T, typename FromJson>
std::vector<T> read_jsonl(const std::string& path, const std::string& kind,
                          FromJson from_json, ArtifactHeader* header = nullptr) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArtifactError("missing artifact: " + path);
  std::string line;
  std::vector<T> out;
  bool first = true;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw StructuralError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
    if (first && j.contains("header")) {
      auto h = ArtifactHeader::from_json(j);
      if (h.kind != kind) {
        throw ArtifactError(path + ": expected a " + kind + " artifact, found " + h.kind);
      }
      if (header) *header = h;
      first = false;
      continue;
    }
    first = false;
    out.push_back(from_json(j));
  }
  return out;
}

inline void write_chains(const std::string& path, const ArtifactHeader& h,
                         const std::vector<ChainRecord>& chains) {
  write_jsonl(path, h, chains, chain_to_json);
}

inline std::vector<ChainRecord> read_chains(const std::string& path,
                                            ArtifactHeader* header = nullptr) {
  return read_jsonl<ChainRecord>(path, "chains", chain_from_json, header);
}

inline void write_episodes(const std::string& path, const ArtifactHeader& h,
                           const std::vector<Episode>& eps) {
  write_jsonl(path, h, eps, episode_to_json);
}

inline std::vector<Episode> read_episodes(const std::string& path,
                                          ArtifactHeader* header = nullptr) {
  return read_jsonl<Episode>(path, "episodes", episode_from_json, header);
}

}  // namespace extrap
