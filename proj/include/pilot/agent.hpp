#pragma once

#include <deque>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace pilot {

/// The slot board of one pilot: cores indexed 0..cores-1, each free or
/// occupied by a CU id. A CU holds exactly its core count in distinct slots
/// while STAGING or RUNNING, and zero otherwise; assignment always takes the
/// lowest free indices, so layouts are deterministic.
class SlotBoard {
public:
    explicit SlotBoard(int cores) : slots_(static_cast<std::size_t>(cores)) {}

    int cores() const { return static_cast<int>(slots_.size()); }
    int free_cores() const;
    bool occupies(const std::string& cu_id) const;
    std::vector<int> slots_of(const std::string& cu_id) const;

    /// Claims `cores` slots for the CU; returns the indices taken, or
    /// nothing when they don't fit (the board is unchanged then).
    std::optional<std::vector<int>> occupy(const std::string& cu_id, int cores);
    void vacate(const std::string& cu_id);

private:
    std::vector<std::string> slots_; // empty string = free
};

/// FIFO admission for one agent: RUN_CU arrivals queue in delivery order and
/// are admitted strictly head-first — a wide CU at the head blocks everyone
/// behind it until enough slots free up. Commands are deduplicated by
/// command_id before they ever reach the queue.
class AdmissionController {
public:
    explicit AdmissionController(int cores) : board_(cores) {}

    /// Records the command id; returns false for an already-seen id (the
    /// duplicate must be acked but nothing else).
    bool first_delivery(const std::string& command_id);

    /// Queues a CU for admission (call only after first_delivery said yes).
    void enqueue(const std::string& cu_id, int cores, const std::string& command_id);

    struct Admitted {
        std::string cu_id;
        std::string command_id;
        std::vector<int> slots;
    };
    /// Admits from the queue head while the head fits; stops at the first
    /// CU that doesn't. Returns what got in, in order.
    std::vector<Admitted> admit_ready();

    /// Drops a not-yet-admitted CU from the queue (cancelation). True if it
    /// was queued.
    bool remove_queued(const std::string& cu_id);
    bool is_queued(const std::string& cu_id) const;
    std::vector<std::string> queued_cus() const; // admission order

    void release(const std::string& cu_id) { board_.vacate(cu_id); }
    const SlotBoard& board() const { return board_; }
    int free_cores() const { return board_.free_cores(); }
    bool active(const std::string& cu_id) const { return board_.occupies(cu_id); }

private:
    struct Waiting {
        std::string cu_id;
        int cores = 0;
        std::string command_id;
    };
    SlotBoard board_;
    std::deque<Waiting> queue_;
    std::set<std::string> seen_commands_;
};

} // namespace pilot
