#include "rtrace/embedding.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>

#include <nlohmann/json.hpp>

#include "http_client.hpp"
#include "rtrace/error.hpp"
#include "rtrace/io.hpp"

namespace rtrace {

namespace {

bool is_token_byte(unsigned char c) { return std::isalnum(c) != 0 || c >= 0x80; }

bool blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; });
}

}  // namespace

std::uint64_t fnv1a64(std::string_view bytes) noexcept {
  std::uint64_t h = 14695981039346656037ull;
  for (char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  return h;
}

std::vector<std::string_view> tokenize(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && !is_token_byte(static_cast<unsigned char>(text[i]))) ++i;
    const std::size_t b = i;
    while (i < text.size() && is_token_byte(static_cast<unsigned char>(text[i]))) ++i;
    if (i > b) out.push_back(text.substr(b, i - b));
  }
  return out;
}

std::string_view truncate_tokens(std::string_view text, std::size_t max_tokens, bool* truncated,
                                 std::size_t* token_count) {
  auto tokens = tokenize(text);
  if (token_count) *token_count = tokens.size();
  const bool cut = tokens.size() > max_tokens;
  if (truncated) *truncated = cut;
  if (!cut) return text;
  if (max_tokens == 0) return text.substr(0, 0);
  const auto& last = tokens[max_tokens - 1];
  return text.substr(0, static_cast<std::size_t>(last.data() - text.data()) + last.size());
}

HashedBagProvider::HashedBagProvider(std::size_t dim, std::size_t max_tokens)
    : dim_(dim), max_tokens_(max_tokens), id_("hashed-bow-" + std::to_string(dim)) {
  if (dim_ == 0 || max_tokens_ == 0) throw Error(Errc::PreconditionFailed, "dim and max_tokens must be positive");
}

EmbedResult HashedBagProvider::embed(std::string_view text) {
  if (blank(text)) throw Error(Errc::EmptyText, "embedding input is empty");
  EmbedResult r;
  auto kept = truncate_tokens(text, max_tokens_, &r.truncated, &r.token_count);
  auto tokens = tokenize(kept);
  if (tokens.empty()) throw Error(Errc::EmptyText, "embedding input has no tokens");

  std::vector<double> counts(dim_, 0.0);
  std::string lowered;
  for (auto t : tokens) {
    lowered.assign(t);
    for (char& c : lowered) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    counts[fnv1a64(lowered) % dim_] += 1.0;
  }
  double norm = 0.0;
  for (double c : counts) norm += c * c;
  norm = std::sqrt(norm);

  r.vector.provider_id = id_;
  r.vector.values.resize(dim_);
  for (std::size_t i = 0; i < dim_; ++i) r.vector.values[i] = static_cast<float>(counts[i] / norm);
  return r;
}

HttpEmbeddingProvider::HttpEmbeddingProvider(HttpEmbeddingConfig config, Sleeper sleep)
    : config_(std::move(config)), sleep_(std::move(sleep)), id_("http:" + config_.model) {}

EmbedResult HttpEmbeddingProvider::embed(std::string_view text) {
  if (blank(text)) throw Error(Errc::EmptyText, "embedding input is empty");
  EmbedResult r;
  auto kept = truncate_tokens(text, config_.max_tokens, &r.truncated, &r.token_count);

  nlohmann::json body{{"input", nlohmann::json::array({std::string(kept)})}, {"model", config_.model}};
  std::vector<std::pair<std::string, std::string>> headers;
  if (!config_.api_key.empty()) headers.emplace_back("Authorization", "Bearer " + config_.api_key);

  auto target = detail::parse_base_url(config_.base_url);
  auto outcome =
      detail::post_json_with_retries(target, "/embeddings", body.dump(), headers, config_.timeout, config_.retry, sleep_);
  if (!outcome.reply) throw Error(Errc::ProviderUnavailable, outcome.last_error);
  if (outcome.reply->status != 200)
    throw Error(Errc::ProviderUnavailable,
                "HTTP " + std::to_string(outcome.reply->status) + ": " + outcome.reply->body);

  auto reply = nlohmann::json::parse(outcome.reply->body, nullptr, false);
  if (reply.is_discarded() || !reply.contains("data") || !reply["data"].is_array() || reply["data"].empty() ||
      !reply["data"][0].contains("embedding") || !reply["data"][0]["embedding"].is_array())
    throw Error(Errc::ProviderUnavailable, "malformed embedding response");
  const auto& arr = reply["data"][0]["embedding"];
  if (arr.size() != config_.dim)
    throw Error(Errc::DimensionMismatch,
                "expected " + std::to_string(config_.dim) + " values, got " + std::to_string(arr.size()));
  r.vector.provider_id = id_;
  r.vector.values.reserve(arr.size());
  for (const auto& v : arr) {
    if (!v.is_number()) throw Error(Errc::ProviderUnavailable, "non-numeric embedding entry");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw Error(Errc::ProviderUnavailable, "non-finite embedding entry");
    r.vector.values.push_back(static_cast<float>(d));
  }
  return r;
}

EmbedResult CachingProvider::embed(std::string_view text) {
  const auto key = std::make_pair(inner_->provider_id(), fnv1a64(text));
  {
    std::lock_guard lock(mu_);
    if (auto it = cache_.find(key); it != cache_.end()) {
      for (const auto& [stored_text, result] : it->second) {
        if (stored_text == text) {
          ++hits_;
          return result;
        }
      }
    }
  }
  auto result = inner_->embed(text);
  std::lock_guard lock(mu_);
  ++misses_;
  cache_[key].emplace_back(std::string(text), result);
  return result;
}

std::size_t CachingProvider::hits() const {
  std::lock_guard lock(mu_);
  return hits_;
}

std::size_t CachingProvider::misses() const {
  std::lock_guard lock(mu_);
  return misses_;
}

double cosine(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw Error(Errc::ProviderMismatch, "dimension mismatch");
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    nu += u[i] * u[i];
    nv += v[i] * v[i];
  }
  if (nu == 0.0 || nv == 0.0) throw Error(Errc::ZeroVector, "cosine of a zero vector");
  const double c = dot / (std::sqrt(nu) * std::sqrt(nv));
  return std::clamp(c, -1.0, 1.0);
}

double cosine(const EmbeddingVector& u, const EmbeddingVector& v) {
  if (u.provider_id != v.provider_id)
    throw Error(Errc::ProviderMismatch, u.provider_id + " vs " + v.provider_id);
  if (u.dim() != v.dim()) throw Error(Errc::ProviderMismatch, "dimension mismatch");
  std::vector<double> a(u.values.begin(), u.values.end());
  std::vector<double> b(v.values.begin(), v.values.end());
  return cosine(std::span<const double>(a), std::span<const double>(b));
}

std::vector<double> mean_pool(std::span<const std::vector<double>> token_vectors) {
  if (token_vectors.empty()) throw Error(Errc::EmptyList, "mean_pool of no vectors");
  const std::size_t dim = token_vectors.front().size();
  std::vector<double> out(dim, 0.0);
  for (const auto& v : token_vectors) {
    if (v.size() != dim) throw Error(Errc::RaggedDimensions, std::to_string(v.size()) + " vs " + std::to_string(dim));
    for (std::size_t i = 0; i < dim; ++i) out[i] += v[i];
  }
  const double n = static_cast<double>(token_vectors.size());
  for (double& x : out) x /= n;
  return out;
}

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint64_t get_le(std::string_view bytes, std::size_t pos, int width) {
  std::uint64_t v = 0;
  for (int i = 0; i < width; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[pos + i])) << (8 * i);
  return v;
}

constexpr std::string_view kMagic = "RTRC";
constexpr std::uint32_t kVersion = 1;

}  // namespace

std::string encode_embedding_store(std::uint32_t dim, std::span<const StoredEmbedding> records) {
  std::string out(kMagic);
  put_u32(out, kVersion);
  put_u32(out, dim);
  for (const auto& r : records) {
    if (r.values.size() != dim)
      throw Error(Errc::DimensionMismatch, "turn " + std::to_string(r.turn_id) + " has dim " +
                                               std::to_string(r.values.size()));
    put_u64(out, r.turn_id);
    for (float f : r.values) put_u32(out, std::bit_cast<std::uint32_t>(f));
  }
  return out;
}

std::vector<StoredEmbedding> decode_embedding_store(std::string_view bytes, std::uint32_t* dim_out) {
  if (bytes.size() < 12 || bytes.substr(0, 4) != kMagic) throw Error(Errc::StoreFailure, "not an RTRC embedding store");
  const auto version = static_cast<std::uint32_t>(get_le(bytes, 4, 4));
  if (version != kVersion) throw Error(Errc::StoreFailure, "unsupported store version " + std::to_string(version));
  const auto dim = static_cast<std::uint32_t>(get_le(bytes, 8, 4));
  if (dim_out) *dim_out = dim;
  const std::size_t record = 8 + 4 * static_cast<std::size_t>(dim);
  const std::size_t body = bytes.size() - 12;
  if (dim == 0 || body % record != 0) throw Error(Errc::StoreFailure, "truncated embedding store");
  std::vector<StoredEmbedding> out;
  out.reserve(body / record);
  for (std::size_t pos = 12; pos < bytes.size(); pos += record) {
    StoredEmbedding e;
    e.turn_id = get_le(bytes, pos, 8);
    e.values.resize(dim);
    for (std::uint32_t i = 0; i < dim; ++i)
      e.values[i] = std::bit_cast<float>(static_cast<std::uint32_t>(get_le(bytes, pos + 8 + 4 * i, 4)));
    out.push_back(std::move(e));
  }
  return out;
}

void write_embedding_store(const std::filesystem::path& path, std::uint32_t dim,
                           std::span<const StoredEmbedding> records) {
  io::atomic_write(path, encode_embedding_store(dim, records));
}

std::vector<StoredEmbedding> read_embedding_store(const std::filesystem::path& path, std::uint32_t* dim) {
  return decode_embedding_store(io::read_file(path), dim);
}

}  // namespace rtrace
