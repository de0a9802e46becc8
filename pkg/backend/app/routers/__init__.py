# Routers package - API route handlers for Sparse Market Lab
