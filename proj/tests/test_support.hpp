#pragma once

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <unistd.h>

#include "lsti/pipeline.hpp"

namespace lsti::test {

inline Hyper tiny_hyper(AgentKind kind) {
  Hyper h;
  h.window = kind == AgentKind::long_intention ? 6 : 4;
  h.d_model = 8;
  h.heads = 2;
  h.ffn = 16;
  h.batch = 8;
  h.lr = 1e-2;
  h.max_epochs = 3;
  h.patience = 5;
  return h;
}

inline Persona small_persona() {
  return Persona{"S1",
                 {RoutineEntry{{0, 1, 2, 3, 4, 5, 6},
                               7 * 60,
                               "make breakfast",
                               {RecipeStep{"cook", "stove", 20, "kitchen", std::nullopt},
                                RecipeStep{"eat", "bread", 15, "kitchen", std::nullopt}}},
                  RoutineEntry{{0, 1, 2, 3, 4, 5, 6},
                               12 * 60,
                               "clean the kitchen",
                               {RecipeStep{"wash", "sink", 25, "kitchen", std::nullopt}}},
                  RoutineEntry{{0, 1, 2, 3, 4, 5, 6},
                               19 * 60,
                               "watch tv",
                               {RecipeStep{"watch", "tv", 60, "living room", std::nullopt}}},
                  RoutineEntry{{0, 1, 2, 3, 4, 5, 6},
                               22 * 60,
                               "go to sleep",
                               {RecipeStep{"sleep", "bed", 480, "bedroom", std::nullopt}}}},
                 0.2,
                 5.0};
}

inline LabeledLog small_log(int days = 6, std::uint64_t seed = 3) {
  return simulate_participant(small_persona(), default_world_config(), days, seed);
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("lsti-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

/// One quickly trained model of every kind on small_log().
inline AgentMap tiny_agents(const LabeledLog& data, std::uint64_t seed = 1) {
  const auto corpus = make_corpus({data}, default_world_config());
  AgentMap out;
  for (const auto kind : kAllAgentKinds) {
    out.emplace(kind, train_agent(kind, corpus, tiny_hyper(kind), seed).model);
  }
  return out;
}

}  // namespace lsti::test
