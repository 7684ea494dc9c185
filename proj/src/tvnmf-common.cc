// tvnmf/tvnmf-common.cc

// Copyright 2026  The tvnmf Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include "tvnmf/tvnmf-common.h"

#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

#include <spdlog/sinks/stdout_sinks.h>

namespace tvnmf {

bool AllFinite(const Eigen::Ref<const Matrix> &m) {
  return m.allFinite();
}

spdlog::logger &Log() {
  static std::shared_ptr<spdlog::logger> logger = [] {
    auto l = std::make_shared<spdlog::logger>(
        "tvnmf", std::make_shared<spdlog::sinks::stderr_sink_mt>());
    l->set_pattern("%L %v");
    auto level = spdlog::level::info;
    if (const char *env = std::getenv("TVNMF_LOG")) {
      std::string v(env);
      if (v == "quiet") level = spdlog::level::warn;
      else if (v == "debug") level = spdlog::level::debug;
    }
    l->set_level(level);
    return l;
  }();
  return *logger;
}

void ParallelFor(int64_t n, int num_jobs,
                 const std::function<void(int64_t)> &fn) {
  if (num_jobs <= 1 || n <= 1) {
    for (int64_t i = 0; i < n; i++) fn(i);
    return;
  }
  std::atomic<int64_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (int64_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        next = n;
      }
    }
  };
  std::vector<std::thread> threads;
  int64_t num_threads = std::min<int64_t>(num_jobs, n);
  for (int64_t t = 0; t < num_threads; t++) threads.emplace_back(worker);
  for (auto &t : threads) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace tvnmf
