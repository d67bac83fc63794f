"""Rebuild a corpus against a chat endpoint, with caching and cost tracking.

Spins up a tiny local stand-in for the endpoint so the demo runs offline;
point RebuildConfig at a real gateway for production use. Note the second
run: everything comes from the cache, zero requests.
"""

import json
import tempfile
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

from commenteval import (
    CodeCommentPair,
    EvalCorpus,
    ChatCompletionsClient,
    GenerationParams,
    PriceTable,
    ResponseCache,
    estimate_cost,
    rebuild_corpus,
    render_prompt,
)
from commenteval.rebuild import RetryPolicy

request_log = []


class StandInEndpoint(BaseHTTPRequestHandler):
    def log_message(self, *args):
        pass

    def do_POST(self):
        body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
        request_log.append(body)
        prompt = body["messages"][0]["content"]
        payload = json.dumps({
            "choices": [{"message": {"role": "assistant",
                                     "content": "// Does what the name says."}}],
            "usage": {"prompt_tokens": len(prompt) // 4, "completion_tokens": 7},
        }).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)


server = ThreadingHTTPServer(("127.0.0.1", 0), StandInEndpoint)
threading.Thread(target=server.serve_forever, daemon=True).start()
endpoint = f"http://127.0.0.1:{server.server_address[1]}"

corpus = EvalCorpus([
    CodeCommentPair(id=f"m{i}", language="java",
                    code=f"int f{i}(int x){{return x + {i};}}",
                    comment=f"stale comment {i}")
    for i in range(5)
], name="demo")

params = GenerationParams(model="gpt-3.5-turbo")
prices = PriceTable(input_per_million=0.5, output_per_million=1.5)
print("prompt sent for the first pair:")
print(" ", render_prompt(corpus.pairs[0].language, corpus.pairs[0].code))
print(f"\nup-front estimate: ${estimate_cost(corpus, params, prices):.8f}")

cache = ResponseCache(Path(tempfile.mkdtemp()) / "cache")
client = ChatCompletionsClient(endpoint, retry=RetryPolicy(base_delay=0.05))

result = rebuild_corpus(corpus, params, client, cache, max_in_flight=4,
                        price_table=prices)
print(f"\nfirst run: {result.cost.network_calls} requests, "
      f"${result.cost.total_cost:.8f}")
print("rebuilt comment:", result.corpus.pairs[0].comment)
print("source tag:     ", result.corpus.pairs[0].source)

before = len(request_log)
again = rebuild_corpus(corpus, params, client, cache, max_in_flight=4,
                       price_table=prices)
print(f"\nsecond run: {len(request_log) - before} requests "
      f"({again.cost.cache_hits} cache hits) - the cache makes reruns free")

server.shutdown()
