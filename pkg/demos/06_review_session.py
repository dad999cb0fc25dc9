"""Drive the human-review service in process: register, judge, report.

The same WSGI app serves real HTTP under `mmqasynth serve-review`; here it
is called directly so the demo needs no sockets.

Run from the repository root:  python demos/06_review_session.py
"""

import io
import json

from mmqasynth.review import ReviewItemSource, ReviewService

items = [
    ReviewItemSource(
        id=f"item-{i}",
        question=f"Is answer {i} supported by the documents?",
        documents=({"id": f"doc-{i}", "title": f"Doc {i}", "text": "page body"},),
        answer_validated=f"checked answer {i}",
        answer_baseline=f"unchecked answer {i}",
        mode="AB",
    )
    for i in range(4)
]
service = ReviewService(items, n_batches=1, per_batch=4, raters_per_batch=1, seed=9)


def call(method, path, body=None, token=None):
    raw = json.dumps(body).encode() if body is not None else b""
    environ = {
        "REQUEST_METHOD": method,
        "PATH_INFO": path,
        "CONTENT_LENGTH": str(len(raw)),
        "wsgi.input": io.BytesIO(raw),
    }
    if token:
        environ["HTTP_AUTHORIZATION"] = f"Bearer {token}"
    out = {}
    payload = b"".join(service.wsgi_app(environ, lambda s, h: out.update(status=s)))
    return json.loads(payload)


registration = call("POST", "/annotators", {"name": "demo-annotator"})
token = registration["token"]
print(f"registered annotator into batch {registration['batch']} "
      f"({registration['total_items']} items)\n")

choices = ["A_correct", "B_correct", "both", "neither"]
while True:
    view = call("GET", "/items/next", token=token)
    if view.get("done"):
        print(f"\nbatch complete: {view['progress']}")
        break
    choice = choices[view["progress"]["judged"]]
    print(f"{view['item_id']}: A={view['answer_a']!r} B={view['answer_b']!r} -> {choice}")
    call("POST", "/judgments", {"item_id": view["item_id"], "choice": choice}, token=token)

distribution = call("GET", "/reports/distribution")
print("\nmethod-resolved distribution (positions randomized per item):")
for region, count in distribution["regions"].items():
    print(f"  {region}: {count}")
print(f"method tallies: {distribution['method_tallies']}")
