#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "capfuse/util.hpp"

namespace capfuse {

// Prompt text with exactly one {caption1} and one {caption2}.
class PromptTemplate {
 public:
  static constexpr std::string_view kDefault =
      "Combine the meaning of these 2 sentences into 1 sentence, considering the semantic meaning and the "
      "syntactic meaning. The sentences are: {caption1}; {caption2}. These sentences describe an image, I want "
      "to get the best caption of the image, using the information in these two sentences.";

  PromptTemplate() : PromptTemplate(std::string(kDefault)) {}
  explicit PromptTemplate(std::string text);

  const std::string& text() const { return text_; }

 private:
  friend std::string render_prompt(const std::string&, const std::string&, const PromptTemplate&);
  std::string text_;
  std::size_t pos1_ = 0;
  std::size_t pos2_ = 0;
};

std::string render_prompt(const std::string& caption1, const std::string& caption2,
                          const PromptTemplate& tmpl = PromptTemplate());

// Lowercase, punctuation removed, whitespace collapsed.
std::string normalize_for_collapse(std::string_view text);
bool detect_collapse(std::string_view caption1, std::string_view caption2);

struct FusionFlags {
  bool prefix_stripped = false;
  bool collapsed = false;
  bool truncated = false;  // nothing usable survived cleanup

  bool operator==(const FusionFlags&) const = default;
};

struct FusionResult {
  std::string raw;
  std::string cleaned;
  FusionFlags flags;
};

inline const std::vector<std::string>& default_prefixes() {
  static const std::vector<std::string> kPrefixes{"The caption for the image could be:"};
  return kPrefixes;
}

struct PostprocessResult {
  std::string cleaned;
  FusionFlags flags;  // only prefix_stripped and truncated are set here
};

PostprocessResult postprocess(std::string_view raw, const std::vector<std::string>& prefixes = default_prefixes());

struct CompletionRequest {
  std::string prompt;
  double temperature = 0.7;
  int max_tokens = 60;
  // Not sent on the wire; lets offline clients build responses.
  std::string caption1;
  std::string caption2;
};

class FusionClient {
 public:
  virtual ~FusionClient() = default;
  // Throws FusionError (ClientTimeout / ClientRefused) on transport failure.
  virtual std::string complete(const CompletionRequest& request) = 0;
  virtual std::size_t max_concurrency() const { return 0; }
};

// POST {url} with {"prompt", "temperature", "max_tokens"} -> {"text"}.
class HttpFusionClient final : public FusionClient {
 public:
  HttpFusionClient(std::string url, std::chrono::milliseconds timeout = std::chrono::seconds(60),
                   std::size_t max_concurrency = 4);

  std::string complete(const CompletionRequest& request) override;
  std::size_t max_concurrency() const override { return max_concurrency_; }

 private:
  std::string url_;
  std::chrono::milliseconds timeout_;
  std::size_t max_concurrency_;
};

// Offline client answering from a table of sha256(prompt) -> response.
class MockFusionClient final : public FusionClient {
 public:
  enum class Fallback {
    Refuse,  // unknown prompt -> ClientRefused
    Join,    // unknown prompt -> "<caption1 without final punctuation> and <caption2>"
  };

  explicit MockFusionClient(std::map<std::string, std::string> responses = {}, Fallback fallback = Fallback::Refuse)
      : responses_(std::move(responses)), fallback_(fallback) {}

  // Lines of {"prompt_sha256": hex, "response": str}.
  static std::map<std::string, std::string> read_responses(const std::filesystem::path& path);

  std::string complete(const CompletionRequest& request) override;
  std::size_t calls() const { return calls_.load(); }

 private:
  std::map<std::string, std::string> responses_;
  Fallback fallback_;
  std::atomic<std::size_t> calls_{0};
};

struct FuseConfig {
  PromptTemplate prompt_template;
  double temperature = 0.7;
  int max_tokens = 60;
  bool skip_on_collapse = false;
  std::vector<std::string> prefixes = default_prefixes();
  int attempts = 3;
  std::chrono::milliseconds backoff{500};  // doubled after each timeout
};

FusionResult fuse(const std::string& caption1, const std::string& caption2, FusionClient& client,
                  const FuseConfig& config = {});

struct FusedRecord {
  std::string image_id;
  std::string caption1;
  std::string caption2;
  FusionResult result;
};

json to_json(const FusedRecord& record);
FusedRecord fused_record_from_json(const json& record);

}  // namespace capfuse
