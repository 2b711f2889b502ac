"""Order the clickable views of a three-screen app so ad views are visited first."""

from madroid.explorer import graph_from_dict, plan_exploration


def node(nid, cls, bounds, clickable=True):
    return {"id": nid, "class": cls, "bounds": list(bounds), "clickable": clickable, "children": []}


def screen(role, nodes):
    root = {"id": "root", "class": "android.widget.FrameLayout", "bounds": [0, 0, 1080, 1920],
            "clickable": False, "children": nodes}
    return {"page_role": role, "root": root}


doc = {
    "entry": "main",
    "states": [
        {"id": "main", "tree": screen("main", [
            node("start", "android.widget.Button", (340, 800, 400, 150)),
            node("options", "android.widget.Button", (340, 1000, 400, 150)),
            node("banner", "android.webkit.WebView", (0, 1770, 1080, 150)),
        ])},
        {"id": "options", "tree": screen("other", [
            node("music", "android.widget.Switch", (40, 200, 1000, 120)),
            node("promo", "android.widget.ViewFlipper", (40, 600, 1000, 400)),
        ])},
        {"id": "quit", "tree": screen("exit", [
            node("ok", "android.widget.Button", (100, 1500, 400, 150)),
            node("interstitial", "com.ads.sdk.AdWebView", (0, 0, 1080, 1824)),
        ])},
    ],
    "transitions": [
        {"from": "main", "node": "options", "to": "options"},
        {"from": "main", "node": "start", "to": "quit"},
    ],
}

for i, step in enumerate(plan_exploration(graph_from_dict(doc)).steps, 1):
    print(f"{i:>2}  {step.state_id:<8} {step.node_id:<14} {step.score:.2f}")
