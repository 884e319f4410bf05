#pragma once

// Synthetic datasets shaped like the 29-moderator schema.

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "bnpmeta/dataset.hpp"
#include "bnpmeta/random.hpp"

namespace fixtures {

inline std::vector<bnpmeta::EffectSizeRecord> random_records(int n, std::uint64_t seed) {
  using namespace bnpmeta;
  const auto schema = ModeratorSchema::canonical();
  Rng rng(seed, 7);
  std::vector<EffectSizeRecord> out;
  for (int i = 0; i < n; ++i) {
    EffectSizeRecord r;
    r.study_id = "study" + std::to_string(i + 1);
    r.var = 0.001 + 0.02 * rng.uniform();
    r.y = 0.45 + 0.2 * rng.normal();
    for (const auto& e : schema.entries()) {
      double v = 0.0;
      if (e.name == "SE")
        v = std::sqrt(r.var);
      else if (e.name == "age")
        v = 36.0 + 200.0 * rng.uniform();
      else if (e.name == "PY")
        v = 1970.0 + 35.0 * rng.uniform();
      else if (e.name == "latitude")
        v = 30.0 + 30.0 * rng.uniform();
      else if (e.name == "longitude")
        v = -120.0 + 140.0 * rng.uniform();
      else if (e.kind == ModeratorKind::binary)
        v = rng.uniform() < 0.4 ? 1.0 : 0.0;
      else
        v = rng.uniform();
      r.x.push_back(v);
    }
    out.push_back(std::move(r));
  }
  return out;
}

inline std::string to_csv(const std::vector<bnpmeta::EffectSizeRecord>& records) {
  std::ostringstream out;
  bnpmeta::write_dataset(out, records, bnpmeta::ModeratorSchema::canonical());
  return out.str();
}

}  // namespace fixtures
