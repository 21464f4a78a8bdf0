#include <httplib.h>

// glibc's resolv.h (pulled in via httplib's socket headers) leaks `_res`/`res`
// compatibility macros that corrupt any later declaration using those names.
#ifdef _res
#undef _res
#endif
#ifdef res
#undef res
#endif

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <mutex>
#include <regex>
#include <thread>
#include <vector>

#include "alignmap/errors.hpp"
#include "alignmap/scoring.hpp"

namespace alignmap {

using json = nlohmann::json;

namespace {

struct SplitUrl {
  std::string origin;  // scheme://host:port
  std::string path;
};

SplitUrl split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw NetworkError("endpoint URL '" + url + "' must include a scheme (http://...)");
  }
  const auto path_begin = url.find('/', scheme_end + 3);
  if (path_begin == std::string::npos) return {url, "/"};
  return {url.substr(0, path_begin), url.substr(path_begin)};
}

void check_endpoint_config(const EndpointConfig& cfg) {
  if (cfg.base_url.empty()) throw ValidationError("endpoint base URL is empty");
  if (cfg.timeout_s <= 0.0) throw ValidationError("endpoint timeout must be positive");
  if (cfg.max_retries < 0) throw ValidationError("endpoint max retries must be >= 0");
  if (cfg.parallelism < 1) throw ValidationError("endpoint parallelism must be >= 1");
}

httplib::Headers auth_headers(const EndpointConfig& cfg) {
  httplib::Headers headers;
  if (!cfg.auth_env.empty()) {
    const char* token = std::getenv(cfg.auth_env.c_str());
    if (!token) {
      throw NetworkError("auth environment variable '" + cfg.auth_env + "' is not set");
    }
    headers.emplace("Authorization", std::string("Bearer ") + token);
  }
  return headers;
}

/// POST with retries on transport failures and non-200 statuses; exponential
/// backoff starting at cfg.backoff_s. A fresh client per call keeps this
/// safe under concurrent use.
std::string post_json(const EndpointConfig& cfg, const httplib::Headers& headers,
                      const std::string& body) {
  const SplitUrl url = split_url(cfg.base_url);
  const auto timeout =
      std::chrono::milliseconds(static_cast<long long>(cfg.timeout_s * 1000.0));
  std::string last_error;
  for (int attempt = 0; attempt <= cfg.max_retries; ++attempt) {
    if (attempt > 0) {
      const double delay = cfg.backoff_s * std::pow(2.0, attempt - 1);
      std::this_thread::sleep_for(std::chrono::duration<double>(delay));
    }
    httplib::Client client(url.origin);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
    auto res = client.Post(url.path, headers, body, "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status != 200) {
      last_error = "HTTP status " + std::to_string(res->status);
      continue;
    }
    return res->body;
  }
  throw NetworkError("POST " + cfg.base_url + " failed after " +
                     std::to_string(cfg.max_retries + 1) + " attempts (" + last_error + ")");
}

/// Runs fn(0..n-1) on up to `parallelism` threads; first exception wins and
/// is rethrown after all workers finish.
template <typename Fn>
void parallel_for(std::size_t n, int parallelism, Fn&& fn) {
  if (n == 0) return;
  const int workers = static_cast<int>(
      std::min<std::size_t>(static_cast<std::size_t>(std::max(parallelism, 1)), n));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::mutex err_mutex;
  std::exception_ptr error;
  auto worker = [&] {
    while (!failed.load()) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mutex);
        if (!error) error = std::current_exception();
        failed.store(true);
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

std::string render_rubric(const std::string& tmpl, const std::string& instruction,
                          const std::string& response) {
  std::string out = tmpl;
  auto replace_all = [&](const std::string& key, const std::string& value) {
    std::size_t pos = 0;
    while ((pos = out.find(key, pos)) != std::string::npos) {
      out.replace(pos, key.size(), value);
      pos += value.size();
    }
  };
  replace_all("{instruction}", instruction);
  replace_all("{response}", response);
  return out;
}

std::string extract_reply_text(const json& reply) {
  if (reply.contains("reply") && reply["reply"].is_string()) {
    return reply["reply"].get<std::string>();
  }
  if (reply.contains("content") && reply["content"].is_string()) {
    return reply["content"].get<std::string>();
  }
  if (reply.contains("choices") && reply["choices"].is_array() && !reply["choices"].empty()) {
    const auto& choice = reply["choices"][0];
    if (choice.is_object() && choice.contains("message") && choice["message"].is_object() &&
        choice["message"].contains("content") && choice["message"]["content"].is_string()) {
      return choice["message"]["content"].get<std::string>();
    }
  }
  throw NetworkError("judge reply has no text field (expected reply/content/choices)");
}

double parse_first_decimal(const std::string& text) {
  static const std::regex number(R"([-+]?(?:\d+\.?\d*|\.\d+))");
  std::smatch m;
  if (!std::regex_search(text, m, number)) {
    throw ScoreParseError("no numeric score in judge reply", text);
  }
  return std::stod(m.str());
}

}  // namespace

ScoredRecord score_judge(const PreferenceRecord& rec, const EndpointConfig& cfg) {
  validate_record(rec, 1);
  check_endpoint_config(cfg);
  if (cfg.rubric_template.find("{instruction}") == std::string::npos ||
      cfg.rubric_template.find("{response}") == std::string::npos) {
    throw ValidationError("rubric template must contain {instruction} and {response}");
  }
  const httplib::Headers headers = auth_headers(cfg);
  ScoredRecord out{rec, {}, Provider::Judge};
  out.scores.resize(rec.responses.size());
  parallel_for(rec.responses.size(), cfg.parallelism, [&](std::size_t i) {
    json req;
    req["model"] = cfg.model;
    req["messages"] = json::array(
        {{{"role", "user"},
          {"content", render_rubric(cfg.rubric_template, rec.instruction, rec.responses[i])}}});
    const std::string body = post_json(cfg, headers, req.dump());
    json reply = json::parse(body, nullptr, /*allow_exceptions=*/false);
    if (reply.is_discarded() || !reply.is_object()) {
      throw NetworkError("judge reply is not a JSON object: " + body);
    }
    const std::string text = extract_reply_text(reply);
    const double score = parse_first_decimal(text);
    if (!std::isfinite(score) || score < cfg.score_lo || score > cfg.score_hi) {
      throw ScoreParseError("judge score " + std::to_string(score) + " outside [" +
                                std::to_string(cfg.score_lo) + ", " +
                                std::to_string(cfg.score_hi) + "]",
                            text);
    }
    out.scores[i] = {score, Provider::Judge, text};
  });
  return out;
}

ScoredRecord score_reward(const PreferenceRecord& rec, const EndpointConfig& cfg) {
  validate_record(rec, 1);
  check_endpoint_config(cfg);
  const httplib::Headers headers = auth_headers(cfg);
  ScoredRecord out{rec, {}, Provider::Reward};
  out.scores.resize(rec.responses.size());
  parallel_for(rec.responses.size(), cfg.parallelism, [&](std::size_t i) {
    json req;
    req["instruction"] = rec.instruction;
    req["response"] = rec.responses[i];
    const std::string body = post_json(cfg, headers, req.dump());
    json reply = json::parse(body, nullptr, /*allow_exceptions=*/false);
    if (reply.is_discarded() || !reply.is_object() || !reply.contains("reward")) {
      throw NetworkError("reward reply has no 'reward' field: " + body);
    }
    const auto& rv = reply["reward"];
    double value = std::numeric_limits<double>::quiet_NaN();
    if (rv.is_number()) {
      value = rv.get<double>();
    } else if (rv.is_string()) {
      try {
        value = std::stod(rv.get<std::string>());
      } catch (const std::exception&) {
        throw NetworkError("reward is not numeric: " + rv.dump());
      }
    } else {
      throw NetworkError("reward is not numeric: " + rv.dump());
    }
    if (!std::isfinite(value)) {
      throw NetworkError("reward is not finite: " + rv.dump());
    }
    out.scores[i] = {value, Provider::Reward, body};
  });
  return out;
}

}  // namespace alignmap
