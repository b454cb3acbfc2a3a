#pragma once

// LLM client contract shared by the labeling and prompting pipelines, plus
// scripted clients for offline runs. Live HTTP clients live in llm_http.hpp
// so this header stays dependency-free.

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "phqmml/common.hpp"

namespace phqmml {

class LlmClient {
public:
    virtual ~LlmClient() = default;
    virtual std::string name() const = 0;
    // Throws on failure; callers own retry policy.
    virtual std::string invoke(const std::string& prompt) = 0;
    virtual int max_concurrency() const { return 1; }
    virtual double timeout_seconds() const { return 30.0; }
    virtual std::size_t context_budget_chars() const { return 1u << 20; }
};

// Replays a fixed queue of responses; wraps around when exhausted.
class ScriptedClient : public LlmClient {
public:
    ScriptedClient(std::string name, std::vector<std::string> responses)
        : name_(std::move(name)), responses_(std::move(responses)) {}

    std::string name() const override { return name_; }

    std::string invoke(const std::string&) override {
        if (responses_.empty()) throw Error(name_ + ": no scripted responses");
        const std::string& r = responses_[next_ % responses_.size()];
        ++next_;
        return r;
    }

private:
    std::string name_;
    std::vector<std::string> responses_;
    std::size_t next_ = 0;
};

// Computes the response from the prompt; the base of the oracle mocks.
class CallbackClient : public LlmClient {
public:
    CallbackClient(std::string name, std::function<std::string(const std::string&)> fn,
                   std::size_t context_budget = 1u << 20)
        : name_(std::move(name)), fn_(std::move(fn)), budget_(context_budget) {}

    std::string name() const override { return name_; }
    std::string invoke(const std::string& prompt) override { return fn_(prompt); }
    std::size_t context_budget_chars() const override { return budget_; }

private:
    std::string name_;
    std::function<std::string(const std::string&)> fn_;
    std::size_t budget_;
};

// Fails `failures` times before succeeding; exercises retry paths.
class FlakyClient : public LlmClient {
public:
    FlakyClient(std::string name, int failures, std::string response)
        : name_(std::move(name)), failures_(failures), response_(std::move(response)) {}

    std::string name() const override { return name_; }

    std::string invoke(const std::string&) override {
        if (calls_++ < failures_) throw Error(name_ + ": simulated transport failure");
        return response_;
    }

    int calls() const { return calls_; }

private:
    std::string name_;
    int failures_;
    std::string response_;
    int calls_ = 0;
};

inline std::string invoke_with_retries(LlmClient& client, const std::string& prompt,
                                       int max_attempts = 3) {
    std::string last_error;
    for (int attempt = 0; attempt < max_attempts; ++attempt) {
        try {
            return client.invoke(prompt);
        } catch (const std::exception& e) {
            last_error = e.what();
        }
    }
    throw Error(client.name() + ": failed after " + std::to_string(max_attempts) +
                " attempts: " + last_error);
}

}  // namespace phqmml
