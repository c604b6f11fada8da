public class Grid {
    // variant build
    public static void main(String[] argv) {
        int[][] cells = new int[3][4];
        for (int r = 0; r < 3; r++) {
            for (int c = 0; c < 4; c++) {
                cells[r][c] = r * 10 + c;
            }
        }
        System.out.println(cells[2][3]);
    }
}
