"""Independent numpy reference implementations used as test oracles.

Everything here is written directly from the block equations with plain
loops/numpy, reading only the learned weights off the package objects;
none of the package's forward code paths are reused.
"""

import numpy as np

LN_EPS = 1e-6


def softplus(v):
    return np.where(v > 30, v, np.log1p(np.exp(np.minimum(v, 30))))


def sigmoid(v):
    return np.where(v >= 0, 1.0 / (1.0 + np.exp(-np.abs(v))), np.exp(-np.abs(v)) / (1.0 + np.exp(-np.abs(v))))


def silu(v):
    return v * sigmoid(v)


def relu(v):
    return np.maximum(v, 0.0)


def layer_norm(x, gamma, beta):
    mu = x.mean(axis=1, keepdims=True)
    var = x.var(axis=1, keepdims=True)
    return gamma[None, :, None, None] * (x - mu) / np.sqrt(var + LN_EPS) + beta[None, :, None, None]


def channel_linear(x, w, b):
    n, c, h, wd = x.shape
    out = np.einsum("oc,nchw->nohw", w, x)
    return out + b[None, :, None, None]


def conv2d_loops(x, w, b, pad):
    n, c, h, wd = x.shape
    o, _, k, _ = w.shape
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    out = np.zeros((n, o, h + 2 * pad - k + 1, wd + 2 * pad - k + 1))
    for nn in range(n):
        for oo in range(o):
            for i in range(out.shape[2]):
                for j in range(out.shape[3]):
                    acc = b[oo]
                    for cc in range(c):
                        for di in range(k):
                            for dj in range(k):
                                acc += xp[nn, cc, i + di, j + dj] * w[oo, cc, di, dj]
                    out[nn, oo, i, j] = acc
    return out


def depthwise_loops(x, w, b):
    n, c, h, wd = x.shape
    k = w.shape[2]
    pad = k // 2
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    out = np.zeros_like(x)
    for nn in range(n):
        for cc in range(c):
            for i in range(h):
                for j in range(wd):
                    acc = b[cc]
                    for di in range(k):
                        for dj in range(k):
                            acc += xp[nn, cc, i + di, j + dj] * w[cc, 0, di, dj]
                    out[nn, cc, i, j] = acc
    return out


def down2(x):
    n, c, h, w = x.shape
    return x.reshape(n, c, h // 2, 2, w // 2, 2).mean(axis=(3, 5))


def up2(x):
    n, c, h, w = x.shape
    out = np.zeros((n, c, 2 * h, 2 * w))
    for i in range(2 * h):
        for j in range(2 * w):
            si, sj = (i + 0.5) / 2 - 0.5, (j + 0.5) / 2 - 0.5
            i0, j0 = int(np.floor(si)), int(np.floor(sj))
            fi, fj = si - i0, sj - j0
            i0c, i1c = np.clip(i0, 0, h - 1), np.clip(i0 + 1, 0, h - 1)
            j0c, j1c = np.clip(j0, 0, w - 1), np.clip(j0 + 1, 0, w - 1)
            out[:, :, i, j] = (
                x[:, :, i0c, j0c] * (1 - fi) * (1 - fj)
                + x[:, :, i0c, j1c] * (1 - fi) * fj
                + x[:, :, i1c, j0c] * fi * (1 - fj)
                + x[:, :, i1c, j1c] * fi * fj
            )
    return out


def naive_scan(x, p):
    """Per-timestep selective-scan recurrence from the parameter object."""
    A = -np.exp(p.a_log.data)
    c, L = x.shape
    n = A.shape[1]
    h = np.zeros((c, n))
    y = np.zeros((c, L))
    for t in range(L):
        xt = x[:, t]
        bt = p.b_proj.data @ xt
        ct = p.c_proj.data @ xt
        dt = softplus(p.dt_proj.data @ xt + p.dt_bias.data)
        e = np.expm1(dt[:, None] * A)
        h = (e + 1.0) * h + (e / A) * bt[None, :] * xt[:, None]
        y[:, t] = h @ ct
    return y


def scan2d(x, scan):
    """Four-direction scan oracle over [N,C,H,W] given a Scan2D module."""
    n, c, h, w = x.shape
    out = np.zeros_like(x)
    for b in range(n):
        img = x[b]
        acc = np.zeros((c, h, w))
        for k, p in enumerate(scan.directions):
            col = k % 2 == 1
            rev = k >= 2
            seq = img.transpose(0, 2, 1) if col else img
            seq = seq.reshape(c, -1)
            if rev:
                seq = seq[:, ::-1]
            y = naive_scan(seq, p)
            if rev:
                y = y[:, ::-1]
            y = y.reshape(c, w, h).transpose(0, 2, 1) if col else y.reshape(c, h, w)
            acc += y
        out[b] = acc
    return out


# ---------------------------------------------------------------------------
# straight-line block transcriptions
# ---------------------------------------------------------------------------


def mixed_scale_oracle(block, m):
    """M1..M3, refinement with upsampled additions, gate, output + skip."""
    feats = []
    cur = channel_linear(m, block.in_proj.w.data, block.in_proj.b.data)
    for i in range(block.scales):
        if i > 0:
            cur = down2(cur)
        cur = silu(depthwise_loops(cur, block.dwconvs[i].w.data, block.dwconvs[i].b.data))
        feats.append(cur)
    refined = None
    for i in reversed(range(block.scales)):
        r = layer_norm(scan2d(feats[i], block.scans[i]), block.norms[i].gamma.data, block.norms[i].beta.data)
        refined = r if refined is None else r + up2(refined)
    gate = silu(channel_linear(m, block.gate_proj.w.data, block.gate_proj.b.data))
    return channel_linear(refined * gate, block.out_proj.w.data, block.out_proj.b.data) + m


def channel_enhance_oracle(block, s):
    sc = conv2d_loops(s, block.conv.w.data, block.conv.b.data, pad=1)
    half = block.half
    sa, sm = sc[:, :half], sc[:, half:]
    pa = sa.mean(axis=(2, 3), keepdims=True)
    pm = sm.max(axis=(2, 3), keepdims=True)

    def se(p, fc1, fc2):
        z = relu(channel_linear(p, fc1.w.data, fc1.b.data))
        return sigmoid(channel_linear(z, fc2.w.data, fc2.b.data))

    ga = se(pa, block.avg_fc1, block.avg_fc2)
    gm = se(pm, block.max_fc1, block.max_fc2)
    mixed = np.concatenate([sa * ga, sm * gm], axis=1)
    n, c, h, w = mixed.shape
    shuffled = mixed.reshape(n, 2, c // 2, h, w).transpose(0, 2, 1, 3, 4).reshape(n, c, h, w)
    return shuffled + s


def frequency_enhance_oracle(block, z):
    spec = np.fft.fft2(z, axes=(-2, -1))
    amp, phase = np.abs(spec), np.angle(spec)
    amp = relu(channel_linear(relu(channel_linear(amp, block.amp1.w.data, block.amp1.b.data)),
                              block.amp2.w.data, block.amp2.b.data))
    phase = relu(conv2d_loops(relu(conv2d_loops(phase, block.phase1.w.data, block.phase1.b.data, pad=1)),
                              block.phase2.w.data, block.phase2.b.data, pad=1))
    rec = amp * np.cos(phase) + 1j * amp * np.sin(phase)
    return np.fft.ifft2(rec, axes=(-2, -1)).real + z


def spatial_frequency_oracle(block, x):
    xb = layer_norm(x, block.norm.gamma.data, block.norm.beta.data)
    out = mixed_scale_oracle(block.mixed, xb)
    if block.channel is not None:
        out = out + channel_enhance_oracle(block.channel, xb)
    if block.frequency is not None:
        out = out + frequency_enhance_oracle(block.frequency, xb)
    return out


def dynamic_fusion_oracle(block, d_v, d_f, d_i):
    bv = layer_norm(d_v, block.ln_v.gamma.data, block.ln_v.beta.data)
    bf = layer_norm(d_f, block.ln_f.gamma.data, block.ln_f.beta.data)
    bi = layer_norm(d_i, block.ln_i.gamma.data, block.ln_i.beta.data)

    def stream(b, proj, dw, scan, norm):
        z = silu(depthwise_loops(channel_linear(b, proj.w.data, proj.b.data), dw.w.data, dw.b.data))
        return layer_norm(scan2d(z, scan), norm.gamma.data, norm.beta.data)

    vp = stream(bv, block.v_proj, block.v_dw, block.v_scan, block.v_norm)
    ip = stream(bi, block.i_proj, block.i_dw, block.i_scan, block.i_norm)
    w = sigmoid(depthwise_loops(channel_linear(bv + bf + bi, block.w_proj.w.data, block.w_proj.b.data),
                                block.w_dw.w.data, block.w_dw.b.data))
    blended = channel_linear(vp * w + ip * (1 - w), block.out_proj.w.data, block.out_proj.b.data)
    return blended + block.s1.data * d_v + block.s2.data * d_i
