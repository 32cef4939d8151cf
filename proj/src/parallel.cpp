#include "pdc/parallel.hpp"

#include <cstdlib>
#include <string>

namespace pdc {

std::size_t resolve_thread_count(int requested) {
  if (requested > 0) return static_cast<std::size_t>(requested);
  if (const char* env = std::getenv("PDC_TOOLKIT_THREADS")) {
    try {
      const int value = std::stoi(env);
      if (value > 0) return static_cast<std::size_t>(value);
    } catch (const std::exception&) {
    }
  }
  return 1;
}

}  // namespace pdc
