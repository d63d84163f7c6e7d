#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "capgp/captcha.hpp"
#include "capgp/error.hpp"
#include "capgp/scheme.hpp"
#include "capgp/service/config.hpp"
#include "capgp/service/images.hpp"
#include "capgp/service/store.hpp"

namespace capgp::service {

inline std::int64_t to_ms(TimePoint t) {
  return std::chrono::duration_cast<std::chrono::milliseconds>(t.time_since_epoch()).count();
}

struct UserRecord {
  PasswordProfile profile;
  TimePoint created_at{};
  SchemeParams params;  // snapshot used at registration
};

struct LoginAttempt {
  std::string user_id;
  std::string challenge_id;
  bool accepted = false;
  std::size_t round = 0;  // 0-based
  std::size_t rounds = 1;
  std::int64_t duration_ms = 0;
  std::vector<std::int64_t> keystrokes_ms;
  std::size_t attempt_number = 1;
  std::int64_t timestamp_ms = 0;
  std::string reason;  // stored for server logs only

  std::vector<std::int64_t> keystroke_gaps() const {
    std::vector<std::int64_t> gaps;
    for (std::size_t i = 1; i < keystrokes_ms.size(); ++i) gaps.push_back(keystrokes_ms[i] - keystrokes_ms[i - 1]);
    return gaps;
  }
};

inline void to_json(json& j, const LoginAttempt& a) {
  j = json{{"user_id", a.user_id},         {"challenge_id", a.challenge_id},
           {"outcome", a.accepted ? "accept" : "reject"},
           {"round", a.round},             {"rounds", a.rounds},
           {"duration_ms", a.duration_ms}, {"keystrokes_ms", a.keystrokes_ms},
           {"attempt_number", a.attempt_number}, {"timestamp_ms", a.timestamp_ms}};
}

inline LoginAttempt attempt_from_json(const json& j) {
  LoginAttempt a;
  a.user_id = j.at("user_id").get<std::string>();
  a.challenge_id = j.at("challenge_id").get<std::string>();
  a.accepted = j.at("outcome").get<std::string>() == "accept";
  a.round = j.at("round").get<std::size_t>();
  a.rounds = j.at("rounds").get<std::size_t>();
  a.duration_ms = j.at("duration_ms").get<std::int64_t>();
  a.keystrokes_ms = j.at("keystrokes_ms").get<std::vector<std::int64_t>>();
  a.attempt_number = j.at("attempt_number").get<std::size_t>();
  a.timestamp_ms = j.at("timestamp_ms").get<std::int64_t>();
  a.reason = j.value("reason", "");
  return a;
}

struct CellView {
  std::size_t slot = 0;
  std::string image_url;
  std::string captcha_url;
};

/// What a client receives for one round. Deliberately has no string field.
struct ChallengePayload {
  std::string challenge_id;
  std::size_t round = 0;
  std::size_t rounds = 1;
  std::int64_t expires_in_seconds = 0;
  std::vector<CellView> cells;
};

inline void to_json(json& j, const ChallengePayload& p) {
  json cells = json::array();
  for (const auto& c : p.cells) {
    cells.push_back({{"slot", c.slot}, {"image_url", c.image_url}, {"captcha_url", c.captcha_url}});
  }
  j = json{{"challenge_id", p.challenge_id}, {"round", p.round}, {"rounds", p.rounds},
           {"expires_in_seconds", p.expires_in_seconds}, {"cells", cells}};
}

struct SubmitResult {
  bool accepted = false;
  std::size_t attempts_left = 0;
  std::size_t rounds_remaining = 0;  // > 0: accepted round, login continues
};

/// Registration, challenge issue and verification over a durable event log.
/// All state mutation happens under one mutex, which also makes challenge
/// consumption atomic under concurrent submits.
class AuthService {
 public:
  using ClockFn = std::function<TimePoint()>;
  using SeedFn = std::function<std::uint64_t()>;

  explicit AuthService(ServiceConfig cfg, ClockFn clock = [] { return Clock::now(); }, SeedFn seeds = {})
      : cfg_(std::move(cfg)),
        clock_(std::move(clock)),
        seeds_(std::move(seeds)),
        images_(cfg_.image_dir, std::max(cfg_.grid_size, std::size_t{1})),
        store_(cfg_.store_path) {
    if (!seeds_) {
      seeds_ = [dev = std::make_shared<std::random_device>()] {
        return (static_cast<std::uint64_t>((*dev)()) << 32) ^ (*dev)();
      };
    }
    params_.grid_size = cfg_.grid_size;
    params_.string_len = cfg_.string_len;
    params_.rounds = cfg_.rounds;
    params_.image_pool = images_.ids();
    params_.challenge_ttl = std::chrono::seconds(cfg_.challenge_ttl_seconds);
    params_.validate();
    replay_store();
  }

  const SchemeParams& params() const { return params_; }
  const ServiceConfig& config() const { return cfg_; }

  void register_user(const std::string& user_id, std::vector<ImageId> pass_images,
                     std::vector<std::vector<int>> positions) {
    std::lock_guard lock(mu_);
    if (user_id.empty()) throw Error(Errc::InvalidParams, "user_id must not be empty");
    if (users_.contains(user_id)) throw Error(Errc::UserExists, "user '" + user_id + "' already registered");
    auto profile = create_profile(user_id, std::move(pass_images), std::move(positions), params_);
    if (profile.pass_image_count() > kMaxPassImages) {
      throw Error(Errc::PermutationCapExceeded, "at most " + std::to_string(kMaxPassImages) + " pass-images");
    }
    const auto now = clock_();
    const json payload = {{"user_id", user_id},
                          {"pass_images", profile.pass_images},
                          {"positions", profile.positions},
                          {"created_at_ms", to_ms(now)},
                          {"params",
                           {{"grid_size", params_.grid_size},
                            {"string_len", params_.string_len},
                            {"alphabet", params_.alphabet},
                            {"min_pass_images", params_.min_pass_images},
                            {"rounds", params_.rounds}}}};
    store_.append("register", payload, to_ms(now));
    users_.emplace(user_id, UserRecord{std::move(profile), now, params_});
  }

  ChallengePayload issue_challenge(const std::string& user_id) {
    std::lock_guard lock(mu_);
    const auto now = clock_();
    const auto& user = find_user(user_id);
    auto& session = sessions_[user_id];
    check_lockout(session, now);
    purge_expired(now);
    std::size_t inflight = 0;
    for (const auto& [id, entry] : challenges_) {
      if (entry.user_id == user_id && !entry.challenge.consumed) ++inflight;
    }
    if (inflight >= cfg_.max_inflight) throw Error(Errc::RateLimited, "a challenge is already outstanding");

    const auto params = user_params(user);
    auto challenge = generate_challenge(user.profile, params, seeds_(), now);
    // The id must not be derivable from the generation seed.
    challenge.challenge_id = fresh_id();
    ChallengePayload payload;
    payload.challenge_id = challenge.challenge_id;
    payload.round = session.round;
    payload.rounds = params.rounds;
    payload.expires_in_seconds = cfg_.challenge_ttl_seconds;
    for (const auto& cell : challenge.cells) {
      payload.cells.push_back({cell.slot_index, "/image/" + cell.image_id + ".png",
                               "/captcha/" + challenge.challenge_id + "/" + std::to_string(cell.slot_index) + ".png"});
    }
    auto key = challenge.challenge_id;
    challenges_.emplace(std::move(key), ChallengeEntry{user_id, session.round, std::move(challenge)});
    return payload;
  }

  SubmitResult submit(const std::string& user_id, const std::string& challenge_id, const std::string& typed,
                      std::vector<std::int64_t> keystrokes_ms = {}) {
    std::lock_guard lock(mu_);
    const auto now = clock_();
    const auto& user = find_user(user_id);
    auto& session = sessions_[user_id];
    check_lockout(session, now);
    auto it = challenges_.find(challenge_id);
    if (it == challenges_.end() || it->second.user_id != user_id) {
      throw Error(Errc::UnknownChallenge, "no such challenge for this user");
    }
    auto& entry = it->second;
    const auto params = user_params(user);
    if (entry.challenge.consumed) throw Error(Errc::ChallengeConsumed, "challenge already used");
    if (now - entry.challenge.created_at > params.challenge_ttl) {
      challenges_.erase(it);
      throw Error(Errc::ChallengeExpired, "challenge expired");
    }
    if (entry.round != session.round) {
      entry.challenge.consumed = true;
      throw Error(Errc::ChallengeConsumed, "challenge belongs to an abandoned round");
    }
    const auto verdict = verify(user.profile, entry.challenge, typed, params, now);

    LoginAttempt attempt;
    attempt.user_id = user_id;
    attempt.challenge_id = challenge_id;
    attempt.accepted = verdict.accepted;
    attempt.round = entry.round;
    attempt.rounds = params.rounds;
    attempt.duration_ms = std::chrono::duration_cast<std::chrono::milliseconds>(now - entry.challenge.created_at).count();
    attempt.keystrokes_ms = std::move(keystrokes_ms);
    attempt.attempt_number = session.failures + 1;
    attempt.timestamp_ms = to_ms(now);
    attempt.reason = std::string(to_string(verdict.reason));

    json record = attempt;
    record["reason"] = attempt.reason;
    store_.append("attempt", record, attempt.timestamp_ms);
    apply_attempt(session, attempt);
    attempts_.push_back(std::move(attempt));

    SubmitResult result;
    result.accepted = verdict.accepted;
    result.attempts_left = cfg_.max_attempts - std::min(cfg_.max_attempts, session.failures);
    result.rounds_remaining = verdict.accepted && session.round > 0 ? params.rounds - session.round : 0;
    return result;
  }

  /// Attempt log dump with per-row keystroke gaps and a summary. Requires
  /// the configured admin token.
  json export_attempts(const std::string& token, const std::optional<std::string>& user_id = std::nullopt) const {
    if (cfg_.admin_token.empty() || token != cfg_.admin_token) {
      throw Error(Errc::Unauthorized, "admin token required");
    }
    std::lock_guard lock(mu_);
    json rows = json::array();
    double total = 0;
    std::size_t accepted = 0;
    for (const auto& a : attempts_) {
      if (user_id && a.user_id != *user_id) continue;
      json row = a;
      row["gaps_ms"] = a.keystroke_gaps();
      rows.push_back(std::move(row));
      total += static_cast<double>(a.duration_ms);
      accepted += a.accepted;
    }
    const auto n = rows.size();
    return json{{"attempts", rows},
                {"summary",
                 {{"count", n}, {"accepted", accepted}, {"mean_duration_ms", n == 0 ? 0.0 : total / n}}}};
  }

  std::vector<std::uint8_t> captcha_png(const std::string& challenge_id, std::size_t slot) const {
    std::lock_guard lock(mu_);
    auto it = challenges_.find(challenge_id);
    if (it == challenges_.end()) throw Error(Errc::UnknownChallenge, "no such challenge");
    const auto& cells = it->second.challenge.cells;
    if (slot >= cells.size()) throw Error(Errc::UnknownChallenge, "no such slot");
    captcha::RenderParams rp;
    rp.fit_width = kTileSize;
    rp.seed = derive_seed(it->second.challenge.rng_seed, 1000 + slot);
    return captcha::encode_png(captcha::render(cells[slot].captcha_text, rp));
  }

  std::vector<std::uint8_t> image_png(const ImageId& id) const { return images_.png(id); }

  std::optional<UserRecord> user(const std::string& user_id) const {
    std::lock_guard lock(mu_);
    auto it = users_.find(user_id);
    if (it == users_.end()) return std::nullopt;
    return it->second;
  }

  std::size_t user_count() const {
    std::lock_guard lock(mu_);
    return users_.size();
  }

  std::vector<LoginAttempt> attempts() const {
    std::lock_guard lock(mu_);
    return attempts_;
  }

  /// Server-side view of an issued challenge (tests and diagnostics).
  std::optional<Challenge> peek_challenge(const std::string& challenge_id) const {
    std::lock_guard lock(mu_);
    auto it = challenges_.find(challenge_id);
    if (it == challenges_.end()) return std::nullopt;
    return it->second.challenge;
  }

 private:
  struct ChallengeEntry {
    std::string user_id;
    std::size_t round = 0;
    Challenge challenge;
  };

  struct LoginSession {
    std::size_t failures = 0;  // consecutive rejected logins
    std::size_t round = 0;     // next round to be answered
    TimePoint last_failure{};
  };

  const UserRecord& find_user(const std::string& user_id) const {
    auto it = users_.find(user_id);
    if (it == users_.end()) throw Error(Errc::UnknownUser, "unknown user");
    return it->second;
  }

  SchemeParams user_params(const UserRecord& user) const {
    SchemeParams p = user.params;
    p.image_pool = params_.image_pool;
    p.challenge_ttl = params_.challenge_ttl;
    return p;
  }

  void check_lockout(LoginSession& session, TimePoint now) const {
    if (session.failures < cfg_.max_attempts) return;
    if (cfg_.lockout_seconds > 0 && now - session.last_failure >= std::chrono::seconds(cfg_.lockout_seconds)) {
      session.failures = 0;
      return;
    }
    throw Error(Errc::AttemptsExhausted, "too many failed attempts");
  }

  void apply_attempt(LoginSession& session, const LoginAttempt& a) {
    if (!a.accepted) {
      ++session.failures;
      session.round = 0;
      session.last_failure = TimePoint{} + std::chrono::milliseconds(a.timestamp_ms);
      return;
    }
    if (a.round + 1 < a.rounds) {
      session.round = a.round + 1;
    } else {
      session.round = 0;
      session.failures = 0;
    }
  }

  void purge_expired(TimePoint now) {
    std::erase_if(challenges_, [&](const auto& kv) {
      return now - kv.second.challenge.created_at > params_.challenge_ttl;
    });
  }

  std::string fresh_id() {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%016llx%016llx", static_cast<unsigned long long>(seeds_()),
                  static_cast<unsigned long long>(seeds_()));
    return buf;
  }

  void replay_store() {
    for (const auto& rec : store_.replay()) {
      try {
        if (rec.record_type == "register") {
          const auto& p = rec.payload;
          SchemeParams snap = params_;
          const auto& sp = p.at("params");
          snap.grid_size = sp.at("grid_size").get<std::size_t>();
          snap.string_len = sp.at("string_len").get<std::size_t>();
          snap.alphabet = sp.at("alphabet").get<std::string>();
          snap.min_pass_images = sp.at("min_pass_images").get<std::size_t>();
          snap.rounds = sp.at("rounds").get<std::size_t>();
          auto profile = create_profile(p.at("user_id").get<std::string>(),
                                        p.at("pass_images").get<std::vector<ImageId>>(),
                                        p.at("positions").get<std::vector<std::vector<int>>>(), snap);
          const auto created = TimePoint{} + std::chrono::milliseconds(p.at("created_at_ms").get<std::int64_t>());
          const auto id = profile.user_id;
          users_.insert_or_assign(id, UserRecord{std::move(profile), created, snap});
        } else if (rec.record_type == "attempt") {
          auto a = attempt_from_json(rec.payload);
          apply_attempt(sessions_[a.user_id], a);
          attempts_.push_back(std::move(a));
        }
      } catch (const json::exception& e) {
        throw Error(Errc::StoreCorrupt, std::string("bad ") + rec.record_type + " record: " + e.what());
      }
    }
  }

  ServiceConfig cfg_;
  ClockFn clock_;
  SeedFn seeds_;
  ImageLibrary images_;
  EventStore store_;
  SchemeParams params_;

  mutable std::mutex mu_;
  std::map<std::string, UserRecord> users_;
  std::unordered_map<std::string, ChallengeEntry> challenges_;
  std::unordered_map<std::string, LoginSession> sessions_;
  std::vector<LoginAttempt> attempts_;
};

}  // namespace capgp::service
