#pragma once

// Human-vs-system game sessions. A round's truth and the system's answer stay
// server-side until the user has guessed; both are revealed together.
//
// Scoring: the user earns 100 for naming the true country, otherwise 0. The
// system earns max(0, 100 - 10 * (rank_of_truth - 1)), so its whole ranking counts.

#include <algorithm>
#include <chrono>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "engine.hpp"
#include "evalkit.hpp"
#include "fusion.hpp"
#include "json_io.hpp"

namespace countryguess {

struct RoundScore {
    int user_points = 0;
    int system_points = 0;
};

inline int system_points_for_rank(std::size_t rank) {
    return std::max(0, 100 - 10 * (static_cast<int>(rank) - 1));
}

inline RoundScore score_round(const CountryCode& user_guess, const CountryRanking& ranking, const CountryCode& truth) {
    return {user_guess == truth ? 100 : 0, system_points_for_rank(rank_of_truth(ranking, truth))};
}

struct Round {
    ManifestItem item;  // holds the truth; never serialized before resolution
    bool resolved = false;
    std::optional<CountryCode> user_guess;
    std::optional<CountryCode> system_top1;
    std::size_t system_rank = 0;
    int user_points = 0;
    int system_points = 0;
};

enum class SessionStatus { active, finished };

struct GameSession {
    std::string id;
    std::vector<Round> rounds;
    std::size_t current_round = 0;
    SessionStatus status = SessionStatus::active;
};

/// Client-facing view of a session: unresolved rounds expose only their image URL.
inline OrderedJson redacted_view(const GameSession& s) {
    OrderedJson j;
    j["id"] = s.id;
    j["status"] = s.status == SessionStatus::active ? "active" : "finished";
    j["current_round"] = s.current_round;
    auto rounds = OrderedJson::array();
    int user_total = 0, system_total = 0;
    for (std::size_t k = 0; k < s.rounds.size(); ++k) {
        const auto& r = s.rounds[k];
        OrderedJson rj;
        rj["index"] = k;
        rj["image"] = "/api/game/" + s.id + "/rounds/" + std::to_string(k) + "/image";
        rj["resolved"] = r.resolved;
        if (r.resolved) {
            rj["truth"] = r.item.truth.str();
            rj["user_guess"] = r.user_guess->str();
            rj["system_top1"] = r.system_top1->str();
            rj["system_rank"] = r.system_rank;
            rj["user_points"] = r.user_points;
            rj["system_points"] = r.system_points;
            user_total += r.user_points;
            system_total += r.system_points;
        }
        rounds.push_back(std::move(rj));
    }
    j["rounds"] = std::move(rounds);
    j["totals"] = OrderedJson{{"user", user_total}, {"system", system_total}};
    return j;
}

/// In-memory session store. Each session is mutated under its own lock.
class GameService {
public:
    using Clock = std::chrono::steady_clock;

    GameService(const Engine& engine, DatasetManifest pool, std::uint64_t seed = std::random_device{}(),
                std::chrono::seconds ttl = std::chrono::hours(2))
        : engine_(engine), pool_(std::move(pool)), rng_(seed), ttl_(ttl) {
        validate_manifest(pool_, engine_.registry());
    }

    std::size_t pool_size() const noexcept { return pool_.items.size(); }

    OrderedJson create(std::size_t round_count) {
        if (round_count == 0) throw ArgumentError("a game needs at least one round");
        if (round_count > pool_.items.size())
            throw ArgumentError("only " + std::to_string(pool_.items.size()) + " panoramas available");
        auto slot = std::make_shared<Slot>();
        {
            std::lock_guard lock(mu_);
            purge_expired();
            std::vector<std::size_t> idx(pool_.items.size());
            for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
            std::shuffle(idx.begin(), idx.end(), rng_);
            for (std::size_t k = 0; k < round_count; ++k) {
                Round r;
                r.item = pool_.items[idx[k]];
                slot->session.rounds.push_back(std::move(r));
            }
            slot->session.id = new_id();
            slot->touched = Clock::now();
            sessions_[slot->session.id] = slot;
        }
        std::lock_guard lock(slot->mu);
        return redacted_view(slot->session);
    }

    OrderedJson state(const std::string& id) {
        auto slot = find(id);
        std::lock_guard lock(slot->mu);
        return redacted_view(slot->session);
    }

    /// Resolves round `k` with the user's guess; returns the session view including the revealed round.
    OrderedJson submit_guess(const std::string& id, std::size_t k, const CountryCode& guess) {
        auto slot = find(id);
        std::lock_guard lock(slot->mu);
        auto& s = slot->session;
        if (k >= s.rounds.size()) throw NotFoundError("session " + id + " has no round " + std::to_string(k));
        if (s.status == SessionStatus::finished) throw StateError("session " + id + " is finished");
        if (s.rounds[k].resolved) throw StateError("round " + std::to_string(k) + " was already answered");
        if (k != s.current_round) throw StateError("round " + std::to_string(s.current_round) + " is the current round");
        if (!engine_.registry().contains(guess)) throw ArgumentError("unknown country " + guess.str());

        auto& r = s.rounds[k];
        auto pano = load_panorama(r.item.path, r.item.north_offset_deg);
        auto report = engine_.guess(pano, r.item.path);
        auto score = score_round(guess, report.ranking, r.item.truth);
        r.user_guess = guess;
        r.system_top1 = report.ranking.top();
        r.system_rank = rank_of_truth(report.ranking, r.item.truth);
        r.user_points = score.user_points;
        r.system_points = score.system_points;
        r.resolved = true;
        ++s.current_round;
        if (s.current_round == s.rounds.size()) s.status = SessionStatus::finished;
        return redacted_view(s);
    }

    /// Image file behind round `k`, for display. Does not reveal anything else.
    fs::path round_image(const std::string& id, std::size_t k) {
        auto slot = find(id);
        std::lock_guard lock(slot->mu);
        if (k >= slot->session.rounds.size()) throw NotFoundError("no such round");
        return slot->session.rounds[k].item.path;
    }

private:
    struct Slot {
        std::mutex mu;
        GameSession session;
        Clock::time_point touched;  // guarded by GameService::mu_
    };

    std::shared_ptr<Slot> find(const std::string& id) {
        std::lock_guard lock(mu_);
        purge_expired();
        auto it = sessions_.find(id);
        if (it == sessions_.end()) throw NotFoundError("unknown game session " + id);
        it->second->touched = Clock::now();
        return it->second;
    }

    void purge_expired() {
        const auto now = Clock::now();
        for (auto it = sessions_.begin(); it != sessions_.end();) {
            if (now - it->second->touched > ttl_)
                it = sessions_.erase(it);
            else
                ++it;
        }
    }

    std::string new_id() {
        static constexpr char hex[] = "0123456789abcdef";
        std::string id;
        for (int i = 0; i < 32; ++i) id.push_back(hex[rng_() & 0xF]);
        return id;
    }

    const Engine& engine_;
    DatasetManifest pool_;
    std::mutex mu_;
    std::mt19937_64 rng_;
    std::chrono::seconds ttl_;
    std::map<std::string, std::shared_ptr<Slot>> sessions_;
};

} // namespace countryguess
