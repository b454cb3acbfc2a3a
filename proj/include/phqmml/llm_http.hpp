#pragma once

// Live LLM client speaking the OpenAI-style chat completions protocol.
// Kept out of llm.hpp so only the CLI pays for the HTTP stack. Credentials
// and endpoint come from environment variables named per client:
//   PHQMML_<NAME>_API_KEY, PHQMML_<NAME>_BASE_URL, PHQMML_<NAME>_MODEL
// with <NAME> the uppercased client name.

#include <httplib.h>
#include <json.hpp>

#include <cstdlib>
#include <string>

#include "phqmml/llm.hpp"

namespace phqmml {

class HttpLlmClient : public LlmClient {
public:
    explicit HttpLlmClient(std::string name) : name_(std::move(name)) {
        const std::string prefix = "PHQMML_" + to_upper_ascii(name_) + "_";
        api_key_ = env_or(prefix + "API_KEY", "");
        base_url_ = env_or(prefix + "BASE_URL", "");
        model_ = env_or(prefix + "MODEL", "");
        if (api_key_.empty() || base_url_.empty() || model_.empty())
            throw ConfigError("live client '" + name_ + "' needs " + prefix + "API_KEY, " +
                              prefix + "BASE_URL and " + prefix + "MODEL in the environment");
    }

    std::string name() const override { return name_; }
    double timeout_seconds() const override { return 120.0; }
    std::size_t context_budget_chars() const override { return 120000; }

    std::string invoke(const std::string& prompt) override {
        nlohmann::json body;
        body["model"] = model_;
        body["temperature"] = 0;
        body["messages"] = nlohmann::json::array({
            {{"role", "user"}, {"content", prompt}},
        });

        httplib::Client client(base_url_);
        client.set_read_timeout(120, 0);
        client.set_connection_timeout(15, 0);
        httplib::Headers headers = {{"Authorization", "Bearer " + api_key_}};
        auto res = client.Post("/v1/chat/completions", headers, body.dump(), "application/json");
        if (!res)
            throw Error(name_ + ": transport error " + httplib::to_string(res.error()));
        if (res->status != 200)
            throw Error(name_ + ": HTTP " + std::to_string(res->status) + ": " + res->body);
        const nlohmann::json reply = nlohmann::json::parse(res->body);
        return reply.at("choices").at(0).at("message").at("content").get<std::string>();
    }

private:
    static std::string to_upper_ascii(std::string s) {
        for (char& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
        return s;
    }

    static std::string env_or(const std::string& key, const std::string& fallback) {
        const char* v = std::getenv(key.c_str());
        return v ? v : fallback;
    }

    std::string name_;
    std::string api_key_, base_url_, model_;
};

}  // namespace phqmml
