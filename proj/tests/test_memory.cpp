#include <doctest.h>

#include <atomic>
#include <cstdlib>
#include <new>
#include <random>

#include "aoplab/ngram.hpp"
#include "support.hpp"

namespace {

std::atomic<std::size_t> g_live{0};
std::atomic<std::size_t> g_peak{0};

constexpr std::size_t kHeader = alignof(std::max_align_t);

void* tracked_alloc(std::size_t n) {
  auto* base = static_cast<unsigned char*>(std::malloc(n + kHeader));
  if (!base) throw std::bad_alloc();
  *reinterpret_cast<std::size_t*>(base) = n;
  const auto live = g_live.fetch_add(n) + n;
  auto peak = g_peak.load();
  while (live > peak && !g_peak.compare_exchange_weak(peak, live)) {
  }
  return base + kHeader;
}

void tracked_free(void* p) noexcept {
  if (!p) return;
  auto* base = static_cast<unsigned char*>(p) - kHeader;
  g_live.fetch_sub(*reinterpret_cast<std::size_t*>(base));
  std::free(base);
}

}  // namespace

void* operator new(std::size_t n) { return tracked_alloc(n); }
void* operator new[](std::size_t n) { return tracked_alloc(n); }
void operator delete(void* p) noexcept { tracked_free(p); }
void operator delete[](void* p) noexcept { tracked_free(p); }
void operator delete(void* p, std::size_t) noexcept { tracked_free(p); }
void operator delete[](void* p, std::size_t) noexcept { tracked_free(p); }

using namespace aoplab;

namespace {

std::size_t peak_while_counting(const std::filesystem::path& file, const ngram::TargetIndex& index,
                                ngram::CountOptions options, std::uint64_t* tokens) {
  const auto before = g_live.load();
  g_peak.store(before);
  const auto counts = ngram::count_files({file}, index, options);
  *tokens = counts.tokens_processed;
  return g_peak.load() - before;
}

void write_corpus(const std::filesystem::path& path, std::size_t lines, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::string data;
  for (std::size_t l = 0; l < lines; ++l) {
    data += testing::random_corpus_text(rng, 12);
    data += '\n';
  }
  testing::write(path, data);
}

}  // namespace

TEST_CASE("counting memory does not grow with corpus length") {
  testing::TempDir dir;
  std::mt19937_64 rng(1);
  std::vector<cap::CapItem> items;
  for (std::size_t i = 0; i < 200; ++i) items.push_back(testing::random_item(rng, i));
  const auto index = ngram::TargetIndex::build(items);

  write_corpus(dir / "small.txt", 20000, 1);
  write_corpus(dir / "large.txt", 160000, 2);
  const ngram::CountOptions options{.chunk_bytes = 1 << 16, .workers = 2};
  std::uint64_t small_tokens = 0, large_tokens = 0;
  const auto small = peak_while_counting(dir / "small.txt", index, options, &small_tokens);
  const auto large = peak_while_counting(dir / "large.txt", index, options, &large_tokens);
  MESSAGE("peak bytes: " << small << " for " << small_tokens << " tokens, " << large << " for " << large_tokens);
  CHECK(large_tokens > 7 * small_tokens);
  CHECK(large < small + small / 2 + (1 << 16));
  CHECK(large < 16 * options.chunk_bytes + (std::size_t{1} << 20));
}
