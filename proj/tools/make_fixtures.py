#!/usr/bin/env python3
"""Regenerate the trained test networks in tests/fixtures/.

Small 7x32 MLPs fitted to analytic shapes inside the unit sphere. SDF nets
use an L1 loss on signed distance, occupancy nets use cross-entropy on the
inside label. The output is the JSON weight schema read by load_network.

    python3 tools/make_fixtures.py --out tests/fixtures

--study writes every shape under all four {sdf, occupancy} x {relu, elu}
combinations instead, the corpus used by the variant benchmark.
"""

import argparse
import json
import math
import os

import torch


def torus(p):
    q = torch.stack([torch.linalg.norm(p[:, [0, 2]], dim=1) - 0.55, p[:, 1]], dim=1)
    return torch.linalg.norm(q, dim=1) - 0.2


def blob(p):
    # smooth union of three spheres
    centers = torch.tensor([[-0.3, 0.0, 0.0], [0.3, 0.1, 0.0], [0.0, -0.2, 0.3]])
    radii = torch.tensor([0.35, 0.3, 0.25])
    d = torch.linalg.norm(p[:, None, :] - centers[None], dim=2) - radii[None]
    k = 0.1
    return -k * torch.logsumexp(-d / k, dim=1)


def dumbbell(p):
    a = torch.linalg.norm(p - torch.tensor([-0.5, 0.0, 0.0]), dim=1) - 0.3
    b = torch.linalg.norm(p - torch.tensor([0.5, 0.0, 0.0]), dim=1) - 0.3
    bar = torch.linalg.norm(p[:, 1:], dim=1) - 0.1
    bar = torch.maximum(bar, p[:, 0].abs() - 0.5)
    return torch.minimum(torch.minimum(a, b), bar)


def bracket(p):
    def box(p, c, h):
        q = (p - torch.tensor(c)).abs() - torch.tensor(h)
        return torch.linalg.norm(q.clamp(min=0), dim=1) + q.max(dim=1).values.clamp(max=0)

    base = box(p, [0.0, -0.4, 0.0], [0.6, 0.1, 0.3])
    wall = box(p, [-0.5, 0.05, 0.0], [0.1, 0.45, 0.3])
    hole = torch.linalg.norm(p[:, [0, 1]] - torch.tensor([-0.5, 0.15]), dim=1) - 0.12
    return torch.maximum(torch.minimum(base, wall), -hole)


FUNCTIONS = {"torus": torus, "blob": blob, "dumbbell": dumbbell, "bracket": bracket}

SHAPES = {
    "torus_sdf_relu": (torus, "sdf", "relu"),
    "blob_sdf_elu": (blob, "sdf", "elu"),
    "dumbbell_occ_relu": (dumbbell, "occupancy", "relu"),
    "bracket_occ_elu": (bracket, "occupancy", "elu"),
}


def sample_points(fn, n, gen):
    # half near the surface (found by projecting uniform samples), half uniform
    u = (torch.rand(4 * n, 3, generator=gen) * 2.2 - 1.1)
    d = fn(u)
    near = u[d.abs().argsort()[: n // 2]]
    sigma = torch.where(torch.arange(n // 2) % 2 == 0, 0.01, 0.1)[:, None]
    near = near + sigma * torch.randn(near.shape, generator=gen)
    uniform = torch.rand(n - n // 2, 3, generator=gen) * 2.2 - 1.1
    p = torch.cat([near, uniform])
    return p, fn(p)


def make_net(activation):
    act = torch.nn.ReLU if activation == "relu" else torch.nn.ELU
    layers, width = [], 3
    for _ in range(7):
        layers += [torch.nn.Linear(width, 32), act()]
        width = 32
    layers.append(torch.nn.Linear(width, 1))
    return torch.nn.Sequential(*layers).double()


def fit(name, fn, mode, activation, seed, epochs, n_samples):
    torch.manual_seed(seed)
    gen = torch.Generator().manual_seed(seed)
    pts, dist = sample_points(fn, n_samples, gen)
    pts, dist = pts.double(), dist.double()
    net = make_net(activation)
    opt = torch.optim.Adam(net.parameters(), lr=1e-2)
    sched = torch.optim.lr_scheduler.StepLR(opt, step_size=max(1, epochs // 2), gamma=0.1)
    bce = torch.nn.BCEWithLogitsLoss()
    for _ in range(epochs):
        perm = torch.randperm(len(pts), generator=gen)
        for i in range(0, len(pts), 512):
            idx = perm[i : i + 512]
            out = net(pts[idx])[:, 0]
            if mode == "sdf":
                loss = (out - dist[idx]).abs().mean()
            else:
                # logit positive outside, matching the sign convention
                loss = bce(out, (dist[idx] > 0).double())
            opt.zero_grad()
            loss.backward()
            opt.step()
        sched.step()
    layers = []
    for m in net:
        if isinstance(m, torch.nn.Linear):
            layers.append({"type": "dense", "weights": m.weight.detach().tolist(), "bias": m.bias.detach().tolist()})
        else:
            layers.append({"type": "activation", "kind": activation})
    return {
        "input_dim": 3,
        "output_semantics": "sdf" if mode == "sdf" else "occupancy_logit",
        "name": name,
        "layers": layers,
        "metadata": {"final_loss": loss.item(), "seed": seed, "epochs": epochs},
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="tests/fixtures")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--epochs", type=int, default=100)
    ap.add_argument("--samples", type=int, default=40000)
    ap.add_argument("--study", action="store_true")
    args = ap.parse_args()
    os.makedirs(args.out, exist_ok=True)
    torch.set_num_threads(1)
    shapes = SHAPES
    if args.study:
        shapes = {
            f"{shape}_{'sdf' if mode == 'sdf' else 'occ'}_{act}": (fn, mode, act)
            for shape, fn in FUNCTIONS.items()
            for mode in ("sdf", "occupancy")
            for act in ("relu", "elu")
        }
    for name, (fn, mode, act) in shapes.items():
        doc = fit(name, fn, mode, act, args.seed, args.epochs, args.samples)
        loss = doc["metadata"]["final_loss"]
        if not math.isfinite(loss):
            raise SystemExit(f"{name}: training diverged")
        with open(os.path.join(args.out, name + ".json"), "w") as f:
            json.dump(doc, f)
        print(f"{name}: final loss {loss:.4g}")


if __name__ == "__main__":
    main()
