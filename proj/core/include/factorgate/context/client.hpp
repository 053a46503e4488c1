#pragma once

#include <atomic>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace factorgate::context {

struct ChatMessage {
    std::string role;  // system | user | assistant
    std::string content;
};

struct GenerationParams {
    std::string model = "mock";
    double temperature = 0.0;
    double top_p = 0.7;
    int max_tokens = 2048;
};

// Text-generation service. complete() throws RemoteError on failure.
class TextGenClient {
public:
    virtual ~TextGenClient() = default;
    virtual std::string complete(std::span<const ChatMessage> messages, const GenerationParams& params) = 0;
    std::string complete(std::string_view user_prompt, const GenerationParams& params);
};

// Value of the first "task: <name>" line in the prompt, or "" if none.
std::string prompt_task(std::string_view prompt);

// Deterministic stand-in. Dispatches on the prompt's task line:
//   memory   "MEMORY" header plus the prompt's "- " bullet lines
//   profile  profile text built from the "factor:" and "metric " lines
//   state    "MARKET STATE <date>" header plus the price and news sections
//   judge    always "0"
//   select   ids of the profiles with the highest mean RankIC, in a
//            <selection> block (count from the "select_k:" line)
// Unknown tasks echo a digest of the prompt. Output depends only on the
// last user message.
class MockClient : public TextGenClient {
public:
    using TextGenClient::complete;
    std::string complete(std::span<const ChatMessage> messages, const GenerationParams& params) override;
    std::size_t calls() const { return calls_.load(); }

private:
    std::atomic<std::size_t> calls_{0};
};

struct RemoteConfig {
    std::string endpoint;  // scheme://host[:port]
    std::string path = "/v1/chat/completions";
    std::string token_env = "FACTORGATE_API_TOKEN";
    int retries = 2;
    double timeout_seconds = 60.0;
    double backoff_seconds = 0.5;  // doubled after each failed attempt
};

// POSTs {model, messages, temperature, top_p, max_tokens} and reads the
// completion from choices[0].message.content (or a top-level "text").
class RemoteClient : public TextGenClient {
public:
    explicit RemoteClient(RemoteConfig config);
    using TextGenClient::complete;
    std::string complete(std::span<const ChatMessage> messages, const GenerationParams& params) override;

private:
    RemoteConfig config_;
    std::string token_;
};

}  // namespace factorgate::context
