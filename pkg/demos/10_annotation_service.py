"""The annotation service end to end, in one process.

Starts the HTTP service on an ephemeral port over a synthetic scene,
lists scenes, pulls the point-cloud payload, posts a metric-scale
annotation the way the browser UI does, and reads it back.
"""

import json
import tempfile
import threading
import urllib.request
from pathlib import Path

import numpy as np

from evbench.colmap_io import write_sparse_model
from evbench.service import ServiceState, create_server
from evbench.synthetic import random_scene
from evbench.tensor_io import read_tensor_bytes

with tempfile.TemporaryDirectory() as tmp:
    root = Path(tmp)
    scene = random_scene(np.random.default_rng(2), n_images=6, n_points=80)
    write_sparse_model(scene, root / "scenes" / "chapel" / "sparse", "binary")

    state = ServiceState(root / "scenes", root / "state")
    server = create_server(state, "127.0.0.1", 0)
    threading.Thread(target=server.serve_forever, daemon=True).start()
    base = f"http://127.0.0.1:{server.server_address[1]}"
    print("service listening at", base)

    with urllib.request.urlopen(f"{base}/api/scenes") as resp:
        print("scenes:", json.loads(resp.read()))

    with urllib.request.urlopen(f"{base}/api/scenes/chapel/cloud?max_points=50") as resp:
        cloud = read_tensor_bytes(resp.read())
    print(f"cloud payload: {cloud.shape[0]} points x {cloud.shape[1]} (xyz + rgb), "
          f"dtype {cloud.dtype}")

    # annotate: two picked points plus the distance measured on a map
    p0, p1 = cloud[0, :3].astype(float), cloud[1, :3].astype(float)
    record = {
        "quality": "good",
        "annotator": "demo",
        "line": [p0.tolist(), p1.tolist()],
        "measured_meters": 27.14,
    }
    req = urllib.request.Request(
        f"{base}/api/scenes/chapel/annotation",
        data=json.dumps(record).encode(),
        headers={"Content-Type": "application/json"},
    )
    with urllib.request.urlopen(req) as resp:
        stored = json.loads(resp.read())
    line_length = float(np.linalg.norm(p1 - p0))
    print(f"\nstored scale: {stored['scale_to_meters']:.6f} m/unit "
          f"(27.14 / {line_length:.6f})")

    with urllib.request.urlopen(f"{base}/api/scenes/chapel/annotation") as resp:
        print("reloaded record matches:", json.loads(resp.read()) == stored)

    with urllib.request.urlopen(f"{base}/api/scenes") as resp:
        print("scene now flagged annotated:", json.loads(resp.read())[0]["annotated"])

    server.shutdown()
