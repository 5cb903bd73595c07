#pragma once

#include <condition_variable>
#include <cstddef>
#include <deque>
#include <mutex>
#include <optional>

namespace ae::pipeline {

enum class DropPolicy { Block, DropOldest };

// Bounded FIFO shared by two stages. Under DropOldest a full queue evicts its
// oldest droppable element; if none is droppable the producer blocks.
// close() wakes everyone: pushes become no-ops and pop() drains what is left.
template <typename T>
class BoundedQueue {
public:
    explicit BoundedQueue(std::size_t capacity) : capacity_(capacity) {}

    // Returns the number of elements evicted to make room.
    template <typename Droppable>
    std::size_t push(T item, DropPolicy policy, Droppable&& droppable) {
        std::unique_lock lock(mutex_);
        std::size_t dropped = 0;
        while (!closed_ && items_.size() >= capacity_) {
            if (policy == DropPolicy::DropOldest) {
                auto it = items_.begin();
                while (it != items_.end() && !droppable(*it)) ++it;
                if (it != items_.end()) {
                    items_.erase(it);
                    ++dropped;
                    continue;
                }
            }
            not_full_.wait(lock);
        }
        if (closed_) return dropped;
        items_.push_back(std::move(item));
        max_depth_ = std::max(max_depth_, items_.size());
        lock.unlock();
        not_empty_.notify_one();
        return dropped;
    }

    std::size_t push(T item) {
        return push(std::move(item), DropPolicy::Block, [](const T&) { return false; });
    }

    std::optional<T> pop() {
        std::unique_lock lock(mutex_);
        not_empty_.wait(lock, [&] { return closed_ || !items_.empty(); });
        return take(lock);
    }

    std::optional<T> try_pop() {
        std::unique_lock lock(mutex_);
        return take(lock);
    }

    void close() {
        {
            std::lock_guard lock(mutex_);
            closed_ = true;
        }
        not_empty_.notify_all();
        not_full_.notify_all();
    }

    bool full() const {
        std::lock_guard lock(mutex_);
        return items_.size() >= capacity_;
    }

    std::size_t max_depth() const {
        std::lock_guard lock(mutex_);
        return max_depth_;
    }

private:
    std::optional<T> take(std::unique_lock<std::mutex>& lock) {
        if (items_.empty()) return std::nullopt;
        T item = std::move(items_.front());
        items_.pop_front();
        lock.unlock();
        not_full_.notify_one();
        return item;
    }

    const std::size_t capacity_;
    mutable std::mutex mutex_;
    std::condition_variable not_empty_;
    std::condition_variable not_full_;
    std::deque<T> items_;
    std::size_t max_depth_ = 0;
    bool closed_ = false;
};

}  // namespace ae::pipeline
