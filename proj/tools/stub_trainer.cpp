// Minimal trainer speaking the engine's wire protocol, used by tests and as a
// template for real integrations. Modes:
//   sum (default)  loss = sum of numeric config values + 1/(1+resource)
//   fail           exit nonzero without output
//   garbage        print a non-JSON line and exit 0
//   sleep SECS     sleep, then answer (exercises the evaluation timeout)
#include <chrono>
#include <iostream>
#include <string>
#include <thread>

#include <nlohmann/json.hpp>

using nlohmann::json;

int main(int argc, char** argv) {
  std::string mode = argc > 1 ? argv[1] : "sum";
  std::string line;
  std::getline(std::cin, line);

  if (mode == "fail") return 3;
  if (mode == "garbage") {
    std::cout << "stub trainer: not a json result line\n";
    return 0;
  }
  if (mode == "sleep") {
    double secs = argc > 2 ? std::stod(argv[2]) : 5.0;
    std::this_thread::sleep_for(std::chrono::duration<double>(secs));
    std::cout << "{\"loss\": 0.5}\n";
    return 0;
  }

  json request = json::parse(line, nullptr, false);
  if (request.is_discarded() || !request.contains("config") || !request.contains("resource")) {
    std::cerr << "stub trainer: malformed request\n";
    return 2;
  }
  double sum = 0;
  for (const auto& [key, value] : request["config"].items())
    if (value.is_number()) sum += value.get<double>();
  double resource = request["resource"].get<double>();
  std::cout << "training to " << resource << " " << request.value("resource_unit", "units")
            << "\n";  // progress chatter; only the last line must be the result
  std::cout << json{{"loss", sum + 1.0 / (1.0 + resource)}}.dump() << "\n";
  return 0;
}
