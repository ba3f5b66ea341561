#include "mal/parallel.hpp"

#include <cstdlib>
#include <string>

namespace mal {

int threads_from_env(int fallback) {
  if (const char* env = std::getenv("MAL_THREADS")) {
    try {
      const int v = std::stoi(env);
      if (v >= 1) return v;
    } catch (const std::exception&) {
    }
  }
  return std::max(fallback, 1);
}

}  // namespace mal
