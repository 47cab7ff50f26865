#include "pilot/agent.hpp"

#include <algorithm>

namespace pilot {

int SlotBoard::free_cores() const {
    return static_cast<int>(std::count(slots_.begin(), slots_.end(), std::string()));
}

bool SlotBoard::occupies(const std::string& cu_id) const {
    return std::find(slots_.begin(), slots_.end(), cu_id) != slots_.end();
}

std::vector<int> SlotBoard::slots_of(const std::string& cu_id) const {
    std::vector<int> out;
    for (std::size_t i = 0; i < slots_.size(); ++i)
        if (slots_[i] == cu_id) out.push_back(static_cast<int>(i));
    return out;
}

std::optional<std::vector<int>> SlotBoard::occupy(const std::string& cu_id, int cores) {
    if (free_cores() < cores) return std::nullopt;
    std::vector<int> taken;
    for (std::size_t i = 0; i < slots_.size() && static_cast<int>(taken.size()) < cores; ++i) {
        if (slots_[i].empty()) {
            slots_[i] = cu_id;
            taken.push_back(static_cast<int>(i));
        }
    }
    return taken;
}

void SlotBoard::vacate(const std::string& cu_id) {
    for (auto& s : slots_)
        if (s == cu_id) s.clear();
}

bool AdmissionController::first_delivery(const std::string& command_id) {
    return seen_commands_.insert(command_id).second;
}

void AdmissionController::enqueue(const std::string& cu_id, int cores,
                                  const std::string& command_id) {
    queue_.push_back({cu_id, cores, command_id});
}

std::vector<AdmissionController::Admitted> AdmissionController::admit_ready() {
    std::vector<Admitted> out;
    while (!queue_.empty()) {
        const auto& head = queue_.front();
        auto slots = board_.occupy(head.cu_id, head.cores);
        if (!slots) break; // head blocks: strict FIFO admission
        out.push_back({head.cu_id, head.command_id, std::move(*slots)});
        queue_.pop_front();
    }
    return out;
}

bool AdmissionController::remove_queued(const std::string& cu_id) {
    auto it = std::find_if(queue_.begin(), queue_.end(),
                           [&](const Waiting& w) { return w.cu_id == cu_id; });
    if (it == queue_.end()) return false;
    queue_.erase(it);
    return true;
}

bool AdmissionController::is_queued(const std::string& cu_id) const {
    return std::any_of(queue_.begin(), queue_.end(),
                       [&](const Waiting& w) { return w.cu_id == cu_id; });
}

std::vector<std::string> AdmissionController::queued_cus() const {
    std::vector<std::string> out;
    for (const auto& w : queue_) out.push_back(w.cu_id);
    return out;
}

} // namespace pilot
