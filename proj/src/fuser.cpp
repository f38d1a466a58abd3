#include "capfuse/fuser.hpp"

#include <httplib.h>

#include <algorithm>
#include <cctype>
#include <thread>

#include "capfuse/error.hpp"
#include "capfuse/http_url.hpp"

namespace capfuse {

namespace {

constexpr std::string_view kPlaceholder1 = "{caption1}";
constexpr std::string_view kPlaceholder2 = "{caption2}";

std::size_t count_occurrences(std::string_view haystack, std::string_view needle) {
  std::size_t n = 0;
  for (auto pos = haystack.find(needle); pos != std::string_view::npos; pos = haystack.find(needle, pos + 1)) ++n;
  return n;
}

bool is_ascii_punct(unsigned char c) { return c < 0x80 && std::ispunct(c); }

bool starts_with_icase(std::string_view s, std::string_view prefix) {
  if (s.size() < prefix.size()) return false;
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(s[i])) != std::tolower(static_cast<unsigned char>(prefix[i]))) {
      return false;
    }
  }
  return true;
}

// ASCII quotes plus the UTF-8 curly quotes LLMs like to emit.
constexpr std::string_view kQuotes[] = {"\"", "'", "`", "\xE2\x80\x9C", "\xE2\x80\x9D", "\xE2\x80\x98", "\xE2\x80\x99"};

bool strip_one_quote(std::string& s) {
  bool changed = false;
  for (auto q : kQuotes) {
    if (s.size() >= q.size() && s.compare(0, q.size(), q) == 0) {
      s.erase(0, q.size());
      changed = true;
    }
    if (s.size() >= q.size() && s.compare(s.size() - q.size(), q.size(), q) == 0) {
      s.erase(s.size() - q.size());
      changed = true;
    }
  }
  return changed;
}

bool has_terminal_punct(std::string_view s) {
  if (s.empty()) return false;
  const char last = s.back();
  return last == '.' || last == '!' || last == '?';
}

}  // namespace

PromptTemplate::PromptTemplate(std::string text) : text_(std::move(text)) {
  if (count_occurrences(text_, kPlaceholder1) != 1) throw Error(Errc::BadTemplate, "{caption1} must appear exactly once");
  if (count_occurrences(text_, kPlaceholder2) != 1) throw Error(Errc::BadTemplate, "{caption2} must appear exactly once");
  pos1_ = text_.find(kPlaceholder1);
  pos2_ = text_.find(kPlaceholder2);
}

std::string render_prompt(const std::string& caption1, const std::string& caption2, const PromptTemplate& tmpl) {
  if (caption1.empty()) throw Error(Errc::EmptyCaption, "caption1");
  if (caption2.empty()) throw Error(Errc::EmptyCaption, "caption2");

  // Splice by template position so placeholder-like text inside a caption is left alone.
  struct Slot {
    std::size_t pos;
    std::size_t len;
    const std::string* value;
  };
  Slot slots[2] = {{tmpl.pos1_, kPlaceholder1.size(), &caption1}, {tmpl.pos2_, kPlaceholder2.size(), &caption2}};
  if (slots[0].pos > slots[1].pos) std::swap(slots[0], slots[1]);

  const auto& t = tmpl.text_;
  std::string out;
  out.reserve(t.size() + caption1.size() + caption2.size());
  std::size_t cursor = 0;
  for (const auto& slot : slots) {
    out.append(t, cursor, slot.pos - cursor);
    out += *slot.value;
    cursor = slot.pos + slot.len;
  }
  out.append(t, cursor, std::string::npos);
  return out;
}

std::string normalize_for_collapse(std::string_view text) {
  std::string out;
  bool pending_space = false;
  for (unsigned char c : text) {
    if (is_ascii_punct(c)) continue;
    if (std::isspace(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(std::tolower(c)));
  }
  return out;
}

bool detect_collapse(std::string_view caption1, std::string_view caption2) {
  return normalize_for_collapse(caption1) == normalize_for_collapse(caption2);
}

PostprocessResult postprocess(std::string_view raw, const std::vector<std::string>& prefixes) {
  PostprocessResult out;
  std::string s(raw);
  for (bool changed = true; changed;) {
    changed = false;
    auto t = trim(s);
    if (t != s) {
      s = std::move(t);
      changed = true;
    }
    if (strip_one_quote(s)) changed = true;
    for (const auto& prefix : prefixes) {
      if (!prefix.empty() && starts_with_icase(s, prefix)) {
        s.erase(0, prefix.size());
        out.flags.prefix_stripped = true;
        changed = true;
      }
    }
  }
  if (s.empty()) {
    out.flags.truncated = true;
    return out;
  }
  if (std::islower(static_cast<unsigned char>(s[0]))) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  if (!has_terminal_punct(s)) s.push_back('.');
  out.cleaned = std::move(s);
  return out;
}

HttpFusionClient::HttpFusionClient(std::string url, std::chrono::milliseconds timeout, std::size_t max_concurrency)
    : url_(std::move(url)), timeout_(timeout), max_concurrency_(max_concurrency) {}

std::string HttpFusionClient::complete(const CompletionRequest& request) {
  const auto url = split_http_url(url_);
  httplib::Client client(url.origin);
  client.set_connection_timeout(timeout_);
  client.set_read_timeout(timeout_);
  client.set_write_timeout(timeout_);
  const json body{{"prompt", request.prompt}, {"temperature", request.temperature}, {"max_tokens", request.max_tokens}};
  auto res = client.Post(url.path.empty() ? "/" : url.path, dump_compact(body), "application/json");
  if (!res) {
    const auto err = res.error();
    const auto code = (err == httplib::Error::Read || err == httplib::Error::Write ||
                       err == httplib::Error::ConnectionTimeout)
                          ? Errc::ClientTimeout
                          : Errc::ClientRefused;
    throw FusionError(code, url_ + ": " + httplib::to_string(err), request.prompt);
  }
  if (res->status < 200 || res->status >= 300) {
    throw FusionError(Errc::ClientRefused, url_ + ": HTTP " + std::to_string(res->status), request.prompt);
  }
  try {
    return json::parse(res->body).at("text").get<std::string>();
  } catch (const json::exception& e) {
    throw FusionError(Errc::ClientRefused, url_ + ": bad response body: " + e.what(), request.prompt);
  }
}

std::map<std::string, std::string> MockFusionClient::read_responses(const std::filesystem::path& path) {
  std::map<std::string, std::string> responses;
  for (const auto& line : read_jsonl(path)) {
    try {
      responses[line.value.at("prompt_sha256").get<std::string>()] = line.value.at("response").get<std::string>();
    } catch (const json::exception& e) {
      throw Error(Errc::MalformedRecord, path.string() + ":" + std::to_string(line.line_no) + ": " + e.what());
    }
  }
  return responses;
}

std::string MockFusionClient::complete(const CompletionRequest& request) {
  ++calls_;
  if (auto it = responses_.find(sha256_hex(request.prompt)); it != responses_.end()) return it->second;
  if (fallback_ == Fallback::Join) {
    std::string first = request.caption1;
    while (!first.empty() && (has_terminal_punct(first) || first.back() == ' ')) first.pop_back();
    std::string second = request.caption2;
    if (!second.empty()) second[0] = static_cast<char>(std::tolower(static_cast<unsigned char>(second[0])));
    return first + " and " + second;
  }
  throw FusionError(Errc::ClientRefused, "mock has no response for prompt", request.prompt);
}

FusionResult fuse(const std::string& caption1, const std::string& caption2, FusionClient& client,
                  const FuseConfig& config) {
  FusionResult result;
  result.flags.collapsed = detect_collapse(caption1, caption2);
  const auto prompt = render_prompt(caption1, caption2, config.prompt_template);

  if (result.flags.collapsed && config.skip_on_collapse) {
    auto pp = postprocess(caption1, config.prefixes);
    result.cleaned = std::move(pp.cleaned);
    result.flags.truncated = pp.flags.truncated;
    return result;
  }

  const CompletionRequest request{prompt, config.temperature, config.max_tokens, caption1, caption2};
  auto delay = config.backoff;
  const int attempts = std::max(1, config.attempts);
  for (int attempt = 1;; ++attempt) {
    try {
      result.raw = client.complete(request);
      break;
    } catch (const FusionError& e) {
      if (e.code() != Errc::ClientTimeout || attempt >= attempts) throw;
    }
    std::this_thread::sleep_for(delay);
    delay *= 2;
  }

  if (trim(result.raw).empty()) throw FusionError(Errc::EmptyResponse, "client returned no text", prompt);
  auto pp = postprocess(result.raw, config.prefixes);
  if (pp.cleaned.empty()) throw FusionError(Errc::EmptyResponse, "response is empty after cleanup", prompt);
  result.cleaned = std::move(pp.cleaned);
  result.flags.prefix_stripped = pp.flags.prefix_stripped;
  result.flags.truncated = pp.flags.truncated;
  return result;
}

json to_json(const FusedRecord& r) {
  return json{{"image_id", r.image_id},
              {"caption1", r.caption1},
              {"caption2", r.caption2},
              {"raw", r.result.raw},
              {"cleaned", r.result.cleaned},
              {"flags",
               {{"prefix_stripped", r.result.flags.prefix_stripped},
                {"collapsed", r.result.flags.collapsed},
                {"truncated", r.result.flags.truncated}}}};
}

FusedRecord fused_record_from_json(const json& j) {
  FusedRecord r;
  r.image_id = j.at("image_id").get<std::string>();
  r.caption1 = j.at("caption1").get<std::string>();
  r.caption2 = j.at("caption2").get<std::string>();
  r.result.raw = j.at("raw").get<std::string>();
  r.result.cleaned = j.at("cleaned").get<std::string>();
  const auto& f = j.at("flags");
  r.result.flags.prefix_stripped = f.value("prefix_stripped", false);
  r.result.flags.collapsed = f.value("collapsed", false);
  r.result.flags.truncated = f.value("truncated", false);
  return r;
}

}  // namespace capfuse
