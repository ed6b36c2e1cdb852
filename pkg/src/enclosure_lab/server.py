from mcp.server.fastmcp import FastMCP
from mcp.server.fastmcp.prompts import base
from mcp.types import ToolAnnotations

from .functions.lab_tools import (
    run_asympt,
    run_forward,
    run_oracle,
    run_reconstruct,
    run_report,
    run_stationary,
)

mcp = FastMCP("Enclosure Lab")

# Define MCP Tools and Prompts


@mcp.prompt()
def enclosure_workflow(scene: str) -> list[base.Message]:
    """Guide a cavity-detection study through the lab tools in order."""
    return [
        base.UserMessage("A user wants to study this scene with the enclosure method:"),
        base.UserMessage(scene),
        base.AssistantMessage(
            "Work through the scene in this order:\n\n"
            "📐 **Step 1: Geometry**\n"
            "   - Use `run_stationary` to find the closest point pairs and l₀\n"
            "   - Check that every pair is non-degenerate\n\n"
            "📏 **Step 2: Asymptotics**\n"
            "   - Use `run_asympt` for the leading coefficient 𝒯₀\n"
            "   - Pass T to see which cavity type the sign of 𝒯₀ reveals\n\n"
            "🌊 **Step 3: Indicator samples**\n"
            "   - Use `run_forward` for exact J_τ (spherical cavities, ball probe)\n\n"
            "🔁 **Step 4: Inversion**\n"
            "   - Use `run_reconstruct` on the samples to estimate l₀ and the sign\n\n"
            "🧪 **Optional checks**\n"
            "   - `run_oracle` brute-forces the top kernel integral (slow)\n"
            "   - `run_report` runs steps 3 and 4 and compares them with step 2"
        ),
        base.AssistantMessage("Let's start with the stationary pairs."),
    ]


mcp.add_tool(
    fn=run_stationary,
    annotations=ToolAnnotations(
        title="📐 Find Stationary Pairs",
        description="Locate closest cavity/probe point pairs, l₀, l₀⁺, l₀⁻, l₁ and the non-degeneracy checks. Start here.",
        readOnlyHint=True,
    ),
)
mcp.add_tool(
    fn=run_asympt,
    annotations=ToolAnnotations(
        title="📏 Leading Asymptotics",
        description="Compute the leading coefficient 𝒯₀ and classify the limit of e^{τT}I_τ for a given T.",
        readOnlyHint=True,
    ),
)
mcp.add_tool(
    fn=run_oracle,
    annotations=ToolAnnotations(
        title="🧪 Kernel Oracle",
        description="Brute-force quadrature of the top-order kernel integral against its Laplace term. Takes minutes.",
        readOnlyHint=True,
    ),
)
mcp.add_tool(
    fn=run_forward,
    annotations=ToolAnnotations(
        title="🌊 Forward Indicator Series",
        description="Exact indicator samples J_τ over a τ grid for spherical cavities around a ball probe.",
        readOnlyHint=True,
    ),
)
mcp.add_tool(
    fn=run_reconstruct,
    annotations=ToolAnnotations(
        title="🔁 Reconstruct l₀",
        description="Fit l₀ and the asymptotic sign from a tau,sign,log_mag CSV or from a forward run.",
        readOnlyHint=True,
    ),
)
mcp.add_tool(
    fn=run_report,
    annotations=ToolAnnotations(
        title="📊 End-to-end Report",
        description="Forward run, reconstruction and comparison with 𝒯₀ in one call.",
        readOnlyHint=True,
    ),
)
