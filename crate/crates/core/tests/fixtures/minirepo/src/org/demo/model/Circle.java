package org.demo.model;

import org.demo.util.MathUtil;
import org.demo.util.StringUtil;

public class Circle extends Shape {
    private final double radius;

    public Circle(double radius) {
        this.radius = radius;
        this.name = StringUtil.label("circle");
    }

    @Override
    public double area() {
        return MathUtil.PI * radius * radius;
    }
}
