#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rtrace/retry.hpp"

namespace rtrace {

struct EmbeddingVector {
  std::vector<float> values;
  std::string provider_id;

  std::size_t dim() const noexcept { return values.size(); }
  friend bool operator==(const EmbeddingVector&, const EmbeddingVector&) = default;
};

struct EmbedResult {
  EmbeddingVector vector;
  bool truncated = false;
  std::size_t token_count = 0;  // tokens in the input before truncation
};

/// Tokens are maximal runs of letters/digits (bytes >= 0x80 count as letters,
/// keeping UTF-8 words whole). Everything else separates tokens.
std::vector<std::string_view> tokenize(std::string_view text);

/// Prefix of text ending at the last byte of its first max_tokens tokens.
std::string_view truncate_tokens(std::string_view text, std::size_t max_tokens, bool* truncated = nullptr,
                                 std::size_t* token_count = nullptr);

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;

  virtual const std::string& provider_id() const = 0;
  virtual std::size_t dim() const = 0;
  virtual std::size_t max_tokens() const = 0;

  /// Errors: EmptyText, ProviderUnavailable, DimensionMismatch.
  virtual EmbedResult embed(std::string_view text) = 0;
};

/// Offline provider: each lower-cased token hashes (FNV-1a 64) to one of
/// `dim` buckets, counts accumulate, and the result is L2-normalized.
class HashedBagProvider final : public EmbeddingProvider {
 public:
  explicit HashedBagProvider(std::size_t dim = 256, std::size_t max_tokens = 512);

  const std::string& provider_id() const override { return id_; }
  std::size_t dim() const override { return dim_; }
  std::size_t max_tokens() const override { return max_tokens_; }
  EmbedResult embed(std::string_view text) override;

 private:
  std::size_t dim_;
  std::size_t max_tokens_;
  std::string id_;
};

struct HttpEmbeddingConfig {
  std::string base_url;  // POST {base_url}/embeddings
  std::string model;
  std::string api_key;
  std::size_t dim = 768;
  std::size_t max_tokens = 512;
  std::chrono::seconds timeout{60};
  RetryPolicy retry;
};

/// Remote provider speaking {"input": [str], "model": str} -> {"data": [{"embedding": [...]}]}.
/// Inputs are head-truncated client side with the same tokenizer as the offline provider.
class HttpEmbeddingProvider final : public EmbeddingProvider {
 public:
  explicit HttpEmbeddingProvider(HttpEmbeddingConfig config, Sleeper sleep = real_sleeper());

  const std::string& provider_id() const override { return id_; }
  std::size_t dim() const override { return config_.dim; }
  std::size_t max_tokens() const override { return config_.max_tokens; }
  EmbedResult embed(std::string_view text) override;

 private:
  HttpEmbeddingConfig config_;
  Sleeper sleep_;
  std::string id_;
};

/// Memoizes another provider keyed by (provider_id, content hash). Thread-safe.
class CachingProvider final : public EmbeddingProvider {
 public:
  explicit CachingProvider(std::shared_ptr<EmbeddingProvider> inner) : inner_(std::move(inner)) {}

  const std::string& provider_id() const override { return inner_->provider_id(); }
  std::size_t dim() const override { return inner_->dim(); }
  std::size_t max_tokens() const override { return inner_->max_tokens(); }
  EmbedResult embed(std::string_view text) override;

  std::size_t hits() const;
  std::size_t misses() const;

 private:
  std::shared_ptr<EmbeddingProvider> inner_;
  mutable std::mutex mu_;
  std::map<std::pair<std::string, std::uint64_t>, std::vector<std::pair<std::string, EmbedResult>>> cache_;
  std::size_t hits_ = 0;
  std::size_t misses_ = 0;
};

std::uint64_t fnv1a64(std::string_view bytes) noexcept;

/// dot(u,v)/(|u||v|) clamped to [-1,1]. Errors: ProviderMismatch (different
/// provider or dim), ZeroVector.
double cosine(const EmbeddingVector& u, const EmbeddingVector& v);
double cosine(std::span<const double> u, std::span<const double> v);

/// Component-wise mean. Errors: EmptyList, RaggedDimensions.
std::vector<double> mean_pool(std::span<const std::vector<double>> token_vectors);

// Binary store: "RTRC", u32 version=1, u32 dim, then (u64 turn_id, dim x f32)
// records, all little-endian.
struct StoredEmbedding {
  std::uint64_t turn_id = 0;
  std::vector<float> values;
  friend bool operator==(const StoredEmbedding&, const StoredEmbedding&) = default;
};

std::string encode_embedding_store(std::uint32_t dim, std::span<const StoredEmbedding> records);
std::vector<StoredEmbedding> decode_embedding_store(std::string_view bytes, std::uint32_t* dim = nullptr);
void write_embedding_store(const std::filesystem::path& path, std::uint32_t dim,
                           std::span<const StoredEmbedding> records);
std::vector<StoredEmbedding> read_embedding_store(const std::filesystem::path& path, std::uint32_t* dim = nullptr);

}  // namespace rtrace
